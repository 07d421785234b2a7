"""Rollout storage, collection and generalized advantage estimation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..env.vector import VecEnv
from .policy import ACTION_DIM, PolicyBundle


@dataclass
class RolloutBuffer:
    obs: np.ndarray  # (T, E, N, F)
    actions: np.ndarray  # (T, E, N, 2)
    log_probs: np.ndarray  # (T, E, N)
    rewards: np.ndarray  # (T, E, N)
    values: np.ndarray  # (T, E, N)
    dones: np.ndarray  # (T, E, N)
    global_states: np.ndarray  # (T, E, G)
    bootstrap_values: np.ndarray  # (E, N), values of the state after the last step
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    @classmethod
    def empty(cls, T: int, E: int, N: int, obs_dim: int, state_dim: int) -> RolloutBuffer:
        return cls(
            obs=np.zeros((T, E, N, obs_dim)),
            actions=np.zeros((T, E, N, ACTION_DIM)),
            log_probs=np.zeros((T, E, N)),
            rewards=np.zeros((T, E, N)),
            values=np.zeros((T, E, N)),
            dones=np.zeros((T, E, N)),
            global_states=np.zeros((T, E, state_dim)),
            bootstrap_values=np.zeros((E, N)),
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.rewards.shape


@dataclass
class EpisodeTracker:
    """Accumulates per-instance episode totals across rollouts."""

    n_envs: int
    returns: np.ndarray = field(init=False)
    deliveries: np.ndarray = field(init=False)
    collisions: np.ndarray = field(init=False)
    finished: list[tuple[float, int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.returns = np.zeros(self.n_envs)
        self.deliveries = np.zeros(self.n_envs, dtype=np.int64)
        self.collisions = np.zeros(self.n_envs, dtype=np.int64)

    def record(self, rewards: np.ndarray, dones: np.ndarray, info: dict) -> None:
        self.returns += rewards.mean(axis=-1)
        self.deliveries += info["deliveries_this_step"]
        self.collisions += info["collision_pairs_this_step"] + info["blocker_contacts_this_step"]
        for e in np.flatnonzero(dones):
            self.finished.append((float(self.returns[e]), int(self.deliveries[e]), int(self.collisions[e])))
            self.returns[e] = 0.0
            self.deliveries[e] = 0
            self.collisions[e] = 0

    def drain(self) -> list[tuple[float, int, int]]:
        out, self.finished = self.finished, []
        return out


def collect_rollout(
    venv: VecEnv,
    policy: PolicyBundle,
    T: int,
    rng: np.random.Generator,
    tracker: EpisodeTracker | None = None,
) -> RolloutBuffer:
    """Run ``T`` steps in every instance with the shared actor sampling actions."""
    cfg = venv.cfg
    E, N = venv.n_envs, cfg.n_agents
    buf = RolloutBuffer.empty(T, E, N, cfg.obs_dim, cfg.state_dim)
    obs = venv.observations()
    gs = venv.global_states()
    for t in range(T):
        actions, logp = policy.act_batch(obs, rng)
        values = policy.values_batch(gs)
        buf.obs[t] = obs
        buf.global_states[t] = gs
        buf.actions[t] = actions
        buf.log_probs[t] = logp
        buf.values[t] = values[:, None]
        rewards, dones, info = venv.step(actions)
        buf.rewards[t] = rewards
        buf.dones[t] = dones[:, None]
        if tracker is not None:
            tracker.record(rewards, dones, info)
        obs = venv.observations()
        gs = venv.global_states()
    buf.bootstrap_values[:] = policy.values_batch(gs)[:, None]
    return buf


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_values: np.ndarray,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward GAE recursion over axis 0; ``dones[t]`` cuts the bootstrap after step ``t``."""
    T = rewards.shape[0]
    adv = np.zeros_like(rewards, dtype=np.float64)
    last = np.zeros_like(rewards[0], dtype=np.float64)
    for t in range(T - 1, -1, -1):
        next_v = bootstrap_values if t == T - 1 else values[t + 1]
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * nonterminal * next_v - values[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    return adv, adv + values


def fill_gae(buf: RolloutBuffer, gamma: float, lam: float) -> RolloutBuffer:
    buf.advantages, buf.returns = compute_gae(
        buf.rewards, buf.values, buf.dones, buf.bootstrap_values, gamma, lam
    )
    return buf
