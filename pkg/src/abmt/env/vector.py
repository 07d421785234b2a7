"""Batch of independent environment instances with auto-reset."""
from __future__ import annotations

import numpy as np

from .scenario import ScenarioConfig
from .world import (
    BatchState,
    WorldState,
    global_state_batch,
    make_rng,
    observe_batch,
    reset_with_rng,
    step_batch,
)


class VecEnv:
    """``n_envs`` instances of one scenario stepped together.

    Instance ``e`` draws its resets from its own generator ``make_rng(seed, e)``,
    so results never depend on how instances are scheduled.
    """

    def __init__(self, cfg: ScenarioConfig, n_envs: int, seed: int):
        self.cfg = cfg
        self.n_envs = n_envs
        self.rngs = [make_rng(seed, e) for e in range(n_envs)]
        self.state = BatchState.stack([reset_with_rng(cfg, rng) for rng in self.rngs])

    def observations(self) -> np.ndarray:
        return observe_batch(self.cfg, self.state)

    def global_states(self) -> np.ndarray:
        return global_state_batch(self.cfg, self.state)

    def instance(self, e: int) -> WorldState:
        s = reset_with_rng(self.cfg, make_rng(0))
        self.state.write_into(e, s)
        s.rng = self.rngs[e]
        return s

    def step(self, actions: np.ndarray):
        """Step all instances; finished instances are reset afterwards.

        Returns ``(rewards (E, N), dones (E,), info)``. ``info`` describes the
        step that was taken, before any reset.
        """
        rewards, info = step_batch(self.cfg, self.state, actions)
        dones = info["terminated"].copy()
        for e in np.flatnonzero(dones):
            self.state.assign(e, reset_with_rng(self.cfg, self.rngs[e]))
        return rewards, dones, info
