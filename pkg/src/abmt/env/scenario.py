"""Scenario configuration for the machine-tending arena."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

Rect = tuple[float, float, float, float]  # (xmin, ymin, xmax, ymax)
Vec2 = tuple[float, float]


class ConfigError(ValueError):
    """Raised for invalid or unloadable scenario configurations."""


def rect_contains(rect: Rect, p: Vec2, margin: float = 0.0) -> bool:
    x0, y0, x1, y1 = rect
    return x0 - margin <= p[0] <= x1 + margin and y0 - margin <= p[1] <= y1 + margin


def rects_overlap(a: Rect, b: Rect) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


@dataclass(frozen=True)
class MachineSpec:
    position: Vec2
    access_point: Vec2
    blockers: tuple[Rect, ...] = ()
    cycle_duration: int = 50
    pickup_radius: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "access_point", tuple(float(v) for v in self.access_point))
        object.__setattr__(self, "blockers", tuple(tuple(float(v) for v in b) for b in self.blockers))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MachineSpec:
        try:
            return cls(**_checked_kwargs(cls, d, "machine"))
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "position": list(self.position),
            "access_point": list(self.access_point),
            "blockers": [list(b) for b in self.blockers],
            "cycle_duration": self.cycle_duration,
            "pickup_radius": self.pickup_radius,
        }


def _default_machines() -> tuple[MachineSpec, ...]:
    # Two machines per side wall; each sits against the wall with a corridor
    # of blockers above and below its access point.
    machines = []
    for side in (-1.0, 1.0):
        for y in (0.6, -0.4):
            wall_x = 1.5 * side
            blockers = (
                _rect_between(wall_x, wall_x - 0.3 * side, y + 0.2, y + 0.3),
                _rect_between(wall_x, wall_x - 0.3 * side, y - 0.3, y - 0.2),
            )
            machines.append(
                MachineSpec(
                    position=(1.4 * side, y),
                    access_point=(1.2 * side, y),
                    blockers=blockers,
                )
            )
    return tuple(machines)


def _rect_between(xa: float, xb: float, ya: float, yb: float) -> Rect:
    return (min(xa, xb), min(ya, yb), max(xa, xb), max(ya, yb))


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int = 3
    arena_half_extent: float = 1.5
    dt: float = 0.1
    max_steps: int = 500
    agent_radius: float = 0.05
    machines: tuple[MachineSpec, ...] = field(default_factory=_default_machines)
    storage_rect: Rect = (-0.3, -1.4, 0.3, -1.1)
    spawn_rect: Rect = (-0.5, -0.3, 0.5, 0.5)
    r_deliver: float = 5.0
    r_pickup: float = 1.0
    w_shaping: float = 0.05
    w_collision: float = 0.5
    w_time: float = 0.005
    a_max: float = 1.0
    v_max: float = 0.5
    drag: float = 0.05

    def __post_init__(self):
        # JSON gives lists; keep the frozen dataclass hashable and canonical.
        object.__setattr__(self, "machines", tuple(
            m if isinstance(m, MachineSpec) else MachineSpec.from_dict(m) for m in self.machines
        ))
        object.__setattr__(self, "storage_rect", tuple(float(v) for v in self.storage_rect))
        object.__setattr__(self, "spawn_rect", tuple(float(v) for v in self.spawn_rect))
        self.validate()

    @property
    def n_machines(self) -> int:
        return len(self.machines)

    @property
    def blockers(self) -> list[Rect]:
        return [b for m in self.machines for b in m.blockers]

    @property
    def storage_center(self) -> Vec2:
        x0, y0, x1, y1 = self.storage_rect
        return ((x0 + x1) / 2.0, (y0 + y1) / 2.0)

    @property
    def obs_dim(self) -> int:
        return 5 + 4 * (self.n_agents - 1) + 4 * self.n_machines + 2

    @property
    def n_tokens(self) -> int:
        return 1 + (self.n_agents - 1) + self.n_machines + 1

    @property
    def state_dim(self) -> int:
        return 5 * self.n_agents + 4 * self.n_machines + 2 + 1

    def validate(self) -> None:
        if self.n_agents < 1:
            raise ConfigError(f"n_agents must be >= 1, got {self.n_agents}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.arena_half_extent <= 0 or self.agent_radius <= 0:
            raise ConfigError("arena_half_extent and agent_radius must be positive")
        h = self.arena_half_extent
        arena = (-h, -h, h, h)
        for name, r in (("storage_rect", self.storage_rect), ("spawn_rect", self.spawn_rect)):
            if not (r[0] < r[2] and r[1] < r[3]):
                raise ConfigError(f"{name} is degenerate: {r}")
            if not (rect_contains(arena, r[:2]) and rect_contains(arena, r[2:])):
                raise ConfigError(f"{name} lies outside the arena")
        for i, m in enumerate(self.machines):
            if m.cycle_duration < 1:
                raise ConfigError(f"machine {i}: cycle_duration must be >= 1")
            if not rect_contains(arena, m.access_point):
                raise ConfigError(f"machine {i}: access_point outside the arena")
        for b in self.blockers:
            if rects_overlap(b, self.storage_rect):
                raise ConfigError(f"blocker {b} overlaps storage_rect")
            for i, m in enumerate(self.machines):
                if rect_contains(b, m.access_point):
                    raise ConfigError(f"machine {i}: access_point inside blocker {b}")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "machines":
                v = [m.to_dict() for m in v]
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ScenarioConfig:
        kwargs = _checked_kwargs(cls, d, "scenario")
        if "machines" in kwargs:
            kwargs["machines"] = tuple(MachineSpec.from_dict(m) for m in kwargs["machines"])
        try:
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path: str | Path) -> ScenarioConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read scenario config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None
        return cls.from_dict(data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self) -> bytes:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).digest()


def _checked_kwargs(cls, d: dict[str, Any], what: str) -> dict[str, Any]:
    if not isinstance(d, dict):
        raise ConfigError(f"{what} config must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"unknown {what} key(s): {', '.join(unknown)}")
    return dict(d)


def reduced_scenario(**overrides) -> ScenarioConfig:
    """One agent, one machine on the left wall, no blockers."""
    machine = MachineSpec(position=(-1.4, 0.3), access_point=(-1.2, 0.3))
    kwargs = dict(n_agents=1, machines=(machine,))
    kwargs.update(overrides)
    return ScenarioConfig(**kwargs)
