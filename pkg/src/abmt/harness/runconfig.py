"""Run configuration files.

A run config is a JSON object::

    {
      "scenario": {...} | "path/to/scenario.json" | "default" | "reduced",
      "ppo": {...},
      "variant": "mappo" | "ab-mappo",
      "seed": 0,
      "output_dir": "runs/example",
      "bridge": {"channel": {...}, "schedule": {...}, "scale": 0.333}
    }

Relative paths resolve against the config file's directory. ``ABMT_OUTPUT_DIR``
overrides ``output_dir``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..env.scenario import ConfigError, ScenarioConfig, reduced_scenario
from ..hil.bridge import BridgeConfig
from ..marl.policy import VARIANTS
from ..marl.ppo import PpoConfig

OUTPUT_DIR_ENV = "ABMT_OUTPUT_DIR"
PRESETS = {"default": ScenarioConfig, "reduced": reduced_scenario}
_KEYS = {"scenario", "ppo", "variant", "seed", "output_dir", "bridge"}


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    variant: str = "mappo"
    seed: int = 0
    output_dir: Path = Path("runs/default")
    bridge: BridgeConfig = field(default_factory=BridgeConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {list(VARIANTS)}, got {self.variant!r}")

    @classmethod
    def from_dict(cls, d: dict[str, Any], base_dir: Path = Path(".")) -> RunConfig:
        unknown = set(d) - _KEYS
        if unknown:
            raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
        scenario = _scenario(d.get("scenario", "default"), base_dir)
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        out = Path(os.environ.get(OUTPUT_DIR_ENV) or d.get("output_dir", "runs/default"))
        if not out.is_absolute() and not os.environ.get(OUTPUT_DIR_ENV):
            out = base_dir / out
        return cls(
            scenario=scenario,
            ppo=PpoConfig.from_dict(d.get("ppo", {})),
            variant=d.get("variant", "mappo"),
            seed=seed,
            output_dir=out,
            bridge=BridgeConfig.from_dict(d.get("bridge", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data, path.parent)

    def with_seed(self, seed: int | None) -> RunConfig:
        if seed is None:
            return self
        return RunConfig(self.scenario, self.ppo, self.variant, seed, self.output_dir, self.bridge)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "ppo": self.ppo.to_dict(),
            "variant": self.variant,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "bridge": self.bridge.to_dict(),
        }


def _scenario(spec, base_dir: Path) -> ScenarioConfig:
    if isinstance(spec, dict):
        return ScenarioConfig.from_dict(spec)
    if isinstance(spec, str):
        if spec in PRESETS:
            return PRESETS[spec]()
        path = Path(spec)
        if not path.is_absolute():
            path = base_dir / path
        if not path.is_file():
            raise FileNotFoundError(f"scenario file not found: {path}")
        return ScenarioConfig.load(path)
    raise ConfigError(f"scenario must be an object, a preset name or a path, got {type(spec).__name__}")
