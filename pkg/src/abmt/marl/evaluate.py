from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..env.scenario import ScenarioConfig
from ..env.vector import VecEnv
from ..env.world import make_rng
from .rollout import EpisodeTracker


@dataclass
class EvalReport:
    episodes: int
    mean_return: float
    std_return: float
    mean_deliveries: float
    mean_collisions: float
    rows: list[tuple[float, int, int]] = field(default_factory=list)  # (return, deliveries, collisions)

    def summary(self) -> str:
        return (
            f"episodes={self.episodes} return={self.mean_return:.4f}+/-{self.std_return:.4f} "
            f"deliveries={self.mean_deliveries:.3f} collisions={self.mean_collisions:.3f}"
        )


def report_from_rows(rows: list[tuple[float, int, int]]) -> EvalReport:
    r = np.array([row[0] for row in rows], dtype=np.float64)
    return EvalReport(
        episodes=len(rows),
        mean_return=float(r.mean()),
        std_return=float(r.std()),
        mean_deliveries=float(np.mean([row[1] for row in rows])),
        mean_collisions=float(np.mean([row[2] for row in rows])),
        rows=list(rows),
    )


def evaluate(policy, cfg: ScenarioConfig, episodes: int, seed: int, deterministic: bool = False) -> EvalReport:
    """Run ``episodes`` full episodes side by side.

    ``policy`` is anything with ``act_batch(obs, rng, deterministic)``. Episode
    return is the per-step mean of agent rewards, summed over the episode;
    collisions count agent pairs plus blocker contacts.
    """
    venv = VecEnv(cfg, episodes, seed)
    rng = make_rng(seed, 2000)
    tracker = EpisodeTracker(episodes)
    for _ in range(cfg.max_steps):
        actions, _ = policy.act_batch(venv.observations(), rng, deterministic)
        rewards, dones, info = venv.step(actions)
        tracker.record(rewards, dones, info)
    return report_from_rows(tracker.drain())
