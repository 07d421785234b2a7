"""Machine-tending world: state, dynamics, collisions, pickups and rewards.

Every operation is written against a batch of independent instances (leading
axis ``E``); the single-instance API wraps a batch of one.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .scenario import ConfigError, ScenarioConfig

PROCESSING = 0
READY = 1

SPAWN_ATTEMPTS = 10_000

# token type slots in the one-hot prefix
TOKEN_SELF, TOKEN_AGENT, TOKEN_MACHINE, TOKEN_STORAGE = range(4)
TOKEN_TYPES = 4
SELF_PAYLOAD = 5
TOKEN_WIDTH = TOKEN_TYPES + SELF_PAYLOAD

GLOBAL_TOKEN_TYPES = 3
GLOBAL_TOKEN_WIDTH = GLOBAL_TOKEN_TYPES + 5


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based (Philox) generator; ``keys`` split independent streams."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class WorldState:
    pos: np.ndarray  # (N, 2)
    vel: np.ndarray  # (N, 2)
    carrying: np.ndarray  # (N,) bool
    phase: np.ndarray  # (M,) PROCESSING / READY
    timer: np.ndarray  # (M,)
    parts_produced: np.ndarray  # (M,)
    delivered_total: int
    step_index: int
    rng: np.random.Generator = field(repr=False)

    def copy(self) -> WorldState:
        return copy.deepcopy(self)

    def equals(self, other: WorldState) -> bool:
        return (
            np.array_equal(self.pos, other.pos)
            and np.array_equal(self.vel, other.vel)
            and np.array_equal(self.carrying, other.carrying)
            and np.array_equal(self.phase, other.phase)
            and np.array_equal(self.timer, other.timer)
            and np.array_equal(self.parts_produced, other.parts_produced)
            and self.delivered_total == other.delivered_total
            and self.step_index == other.step_index
        )


@dataclass
class BatchState:
    """Same fields as :class:`WorldState` stacked over ``E`` instances."""

    pos: np.ndarray  # (E, N, 2)
    vel: np.ndarray
    carrying: np.ndarray  # (E, N)
    phase: np.ndarray  # (E, M)
    timer: np.ndarray
    parts_produced: np.ndarray
    delivered_total: np.ndarray  # (E,)
    step_index: np.ndarray  # (E,)

    @classmethod
    def stack(cls, states: list[WorldState]) -> BatchState:
        return cls(
            pos=np.stack([s.pos for s in states]),
            vel=np.stack([s.vel for s in states]),
            carrying=np.stack([s.carrying for s in states]),
            phase=np.stack([s.phase for s in states]),
            timer=np.stack([s.timer for s in states]),
            parts_produced=np.stack([s.parts_produced for s in states]),
            delivered_total=np.array([s.delivered_total for s in states], dtype=np.int64),
            step_index=np.array([s.step_index for s in states], dtype=np.int64),
        )

    def write_into(self, e: int, state: WorldState) -> None:
        state.pos = self.pos[e].copy()
        state.vel = self.vel[e].copy()
        state.carrying = self.carrying[e].copy()
        state.phase = self.phase[e].copy()
        state.timer = self.timer[e].copy()
        state.parts_produced = self.parts_produced[e].copy()
        state.delivered_total = int(self.delivered_total[e])
        state.step_index = int(self.step_index[e])

    def assign(self, e: int, state: WorldState) -> None:
        self.pos[e] = state.pos
        self.vel[e] = state.vel
        self.carrying[e] = state.carrying
        self.phase[e] = state.phase
        self.timer[e] = state.timer
        self.parts_produced[e] = state.parts_produced
        self.delivered_total[e] = state.delivered_total
        self.step_index[e] = state.step_index


@dataclass
class Observation:
    flat: np.ndarray  # (F,)
    tokens: np.ndarray  # (T, TOKEN_WIDTH)


@dataclass
class StepOutcome:
    observations: list[Observation]
    rewards: np.ndarray  # (N,)
    terminated: bool
    info: dict


class _Geometry:
    """Per-config constant arrays used by the step kernel."""

    def __init__(self, cfg: ScenarioConfig):
        self.access = np.array([m.access_point for m in cfg.machines], dtype=np.float64).reshape(-1, 2)
        self.cycle = np.array([m.cycle_duration for m in cfg.machines], dtype=np.int64)
        self.pickup_radius = np.array([m.pickup_radius for m in cfg.machines], dtype=np.float64)
        r = cfg.agent_radius
        self.inflated = np.array(
            [(b[0] - r, b[1] - r, b[2] + r, b[3] + r) for b in cfg.blockers], dtype=np.float64
        ).reshape(-1, 4)
        self.storage = np.array(cfg.storage_rect, dtype=np.float64)
        self.storage_center = np.array(cfg.storage_center, dtype=np.float64)
        self.lim = cfg.arena_half_extent - r
        n = cfg.n_agents
        self.others = np.array([[j for j in range(n) if j != i] for i in range(n)], dtype=np.int64).reshape(n, n - 1)
        self.pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]


@lru_cache(maxsize=32)
def geometry(cfg: ScenarioConfig) -> _Geometry:
    return _Geometry(cfg)


# -- reset -------------------------------------------------------------------


def _spawn(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    geo = geometry(cfg)
    x0, y0, x1, y1 = cfg.spawn_rect
    min_d2 = (2.0 * cfg.agent_radius) ** 2
    placed: list[np.ndarray] = []
    for _ in range(SPAWN_ATTEMPTS):
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        if any(float(np.sum((p - q) ** 2)) <= min_d2 for q in placed):
            continue
        b = geo.inflated
        if len(b) and np.any((p[0] > b[:, 0]) & (p[0] < b[:, 2]) & (p[1] > b[:, 1]) & (p[1] < b[:, 3])):
            continue
        placed.append(p)
        if len(placed) == cfg.n_agents:
            return np.stack(placed)
    raise ConfigError(
        f"could not place {cfg.n_agents} non-overlapping agents in spawn_rect after {SPAWN_ATTEMPTS} attempts"
    )


def reset_with_rng(cfg: ScenarioConfig, rng: np.random.Generator) -> WorldState:
    pos = _spawn(cfg, rng)
    geo = geometry(cfg)
    timer = np.array([rng.integers(0, c) for c in geo.cycle], dtype=np.int64)
    m = cfg.n_machines
    return WorldState(
        pos=pos,
        vel=np.zeros((cfg.n_agents, 2)),
        carrying=np.zeros(cfg.n_agents, dtype=bool),
        phase=np.full(m, PROCESSING, dtype=np.int64),
        timer=timer,
        parts_produced=np.zeros(m, dtype=np.int64),
        delivered_total=0,
        step_index=0,
        rng=rng,
    )


def reset(cfg: ScenarioConfig, seed: int) -> tuple[WorldState, list[Observation]]:
    state = reset_with_rng(cfg, make_rng(seed))
    return state, [observe(cfg, state, i) for i in range(cfg.n_agents)]


# -- step ----------------------------------------------------------------------


def _goals(cfg: ScenarioConfig, b: BatchState) -> np.ndarray:
    """Shaping target per agent: storage if carrying, else nearest Ready access point."""
    geo = geometry(cfg)
    E, N = b.carrying.shape
    goal = np.zeros((E, N, 2))
    if cfg.n_machines:
        ready = b.phase == READY  # (E, M)
        d = np.linalg.norm(b.pos[:, :, None, :] - geo.access[None, None], axis=-1)  # (E, N, M)
        d = np.where(ready[:, None, :], d, np.inf)
        nearest = np.argmin(d, axis=-1)
        any_ready = np.isfinite(np.min(d, axis=-1))
        goal = np.where(any_ready[..., None], geo.access[nearest], goal)
    return np.where(b.carrying[..., None], geo.storage_center, goal)


def _resolve_collisions(cfg: ScenarioConfig, b: BatchState):
    geo = geometry(cfg)
    r = cfg.agent_radius
    E, N, _ = b.pos.shape
    pair_count = np.zeros(E, dtype=np.int64)
    events = np.zeros((E, N), dtype=np.int64)

    for i, j in geo.pairs:
        d = b.pos[:, j] - b.pos[:, i]
        dist = np.linalg.norm(d, axis=-1)
        hit = dist < 2.0 * r
        if not hit.any():
            continue
        safe = np.where(dist > 1e-12, dist, 1.0)
        normal = np.where((dist > 1e-12)[:, None], d / safe[:, None], np.array([1.0, 0.0]))
        corr = np.where(hit, (2.0 * r - dist) / 2.0, 0.0)[:, None] * normal
        b.pos[:, i] -= corr
        b.pos[:, j] += corr
        pair_count += hit
        events[:, i] += hit
        events[:, j] += hit

    # walls
    lim = geo.lim
    for axis in range(2):
        lo = b.pos[..., axis] < -lim
        hi = b.pos[..., axis] > lim
        b.pos[..., axis] = np.clip(b.pos[..., axis], -lim, lim)
        v = b.vel[..., axis]
        b.vel[..., axis] = np.where((lo & (v < 0)) | (hi & (v > 0)), 0.0, v)

    blocker_hits = np.zeros(E, dtype=np.int64)
    for X0, Y0, X1, Y1 in geo.inflated:
        x, y = b.pos[..., 0], b.pos[..., 1]
        inside = (x > X0) & (x < X1) & (y > Y0) & (y < Y1)
        if not inside.any():
            continue
        # exits that would leave the arena are not candidates
        pen = np.stack([
            np.where(X0 >= -lim, x - X0, np.inf),
            np.where(X1 <= lim, X1 - x, np.inf),
            np.where(Y0 >= -lim, y - Y0, np.inf),
            np.where(Y1 <= lim, Y1 - y, np.inf),
        ], axis=-1)
        side = np.argmin(pen, axis=-1)
        new_x = np.where(side == 0, X0, np.where(side == 1, X1, x))
        new_y = np.where(side == 2, Y0, np.where(side == 3, Y1, y))
        b.pos[..., 0] = np.where(inside, new_x, x)
        b.pos[..., 1] = np.where(inside, new_y, y)
        b.vel[..., 0] = np.where(inside & (side < 2), 0.0, b.vel[..., 0])
        b.vel[..., 1] = np.where(inside & (side >= 2), 0.0, b.vel[..., 1])
        events += inside
        blocker_hits += inside.sum(axis=-1)
    return pair_count, blocker_hits, events


def step_batch(cfg: ScenarioConfig, b: BatchState, actions: np.ndarray) -> tuple[np.ndarray, dict]:
    """Advance every instance of ``b`` in place by one step.

    Returns per-agent rewards ``(E, N)`` and an info dict of ``(E,)`` / ``(E, N)``
    arrays.
    """
    geo = geometry(cfg)
    E, N, _ = b.pos.shape
    actions = np.clip(np.nan_to_num(np.asarray(actions, dtype=np.float64).reshape(E, N, 2)), -1.0, 1.0)

    goal = _goals(cfg, b)
    prev_dist = np.linalg.norm(b.pos - goal, axis=-1)

    # (1) holonomic double integrator with drag and speed cap
    vel = (b.vel + cfg.a_max * actions * cfg.dt) * (1.0 - cfg.drag)
    speed = np.linalg.norm(vel, axis=-1, keepdims=True)
    vel = np.where(speed > cfg.v_max, vel * (cfg.v_max / np.maximum(speed, 1e-300)), vel)
    b.vel[...] = vel
    b.pos += vel * cfg.dt

    # (2) collisions
    pair_count, blocker_hits, events = _resolve_collisions(cfg, b)

    # (3) machine timers
    processing = b.phase == PROCESSING
    b.timer += processing
    done = processing & (b.timer >= geo.cycle[None, :])
    b.phase[done] = READY
    b.timer[done] = 0

    # (4) pickups, lowest agent index first
    picked = np.zeros((E, N), dtype=bool)
    rows = np.arange(E)
    for m in range(cfg.n_machines):
        near = np.linalg.norm(b.pos - geo.access[m], axis=-1) <= geo.pickup_radius[m]
        eligible = near & ~b.carrying & (b.phase[:, m] == READY)[:, None]
        has = eligible.any(axis=-1)
        if not has.any():
            continue
        first = np.argmax(eligible, axis=-1)
        e_idx, a_idx = rows[has], first[has]
        picked[e_idx, a_idx] = True
        b.carrying[e_idx, a_idx] = True
        b.phase[e_idx, m] = PROCESSING
        b.timer[e_idx, m] = 0
        b.parts_produced[e_idx, m] += 1

    # (5) deliveries
    sx0, sy0, sx1, sy1 = geo.storage
    x, y = b.pos[..., 0], b.pos[..., 1]
    in_storage = (x >= sx0) & (x <= sx1) & (y >= sy0) & (y <= sy1)
    delivered = b.carrying & in_storage
    b.carrying &= ~delivered
    b.delivered_total += delivered.sum(axis=-1)

    # (6) rewards
    new_dist = np.linalg.norm(b.pos - goal, axis=-1)
    shaping = cfg.w_shaping * (prev_dist - new_dist)
    rewards = (
        cfg.r_deliver * delivered
        + cfg.r_pickup * picked
        + shaping
        - cfg.w_collision * events
        - cfg.w_time
    )

    b.step_index += 1
    info = {
        "deliveries_this_step": delivered.sum(axis=-1),
        "pickups_this_step": picked.sum(axis=-1),
        "collision_pairs_this_step": pair_count,
        "blocker_contacts_this_step": blocker_hits,
        "delivered_by_agent": delivered,
        "picked_by_agent": picked,
        "collision_events_by_agent": events,
        "shaping_by_agent": shaping,
        "terminated": b.step_index >= cfg.max_steps,
    }
    return rewards, info


def step(cfg: ScenarioConfig, state: WorldState, actions) -> StepOutcome:
    """Advance ``state`` in place by one step."""
    b = BatchState.stack([state])
    rewards, info = step_batch(cfg, b, np.asarray(actions, dtype=np.float64)[None])
    b.write_into(0, state)
    single = {k: (v[0].copy() if np.ndim(v[0]) else v[0].item()) for k, v in info.items()}
    return StepOutcome(
        observations=[observe(cfg, state, i) for i in range(cfg.n_agents)],
        rewards=rewards[0],
        terminated=bool(single.pop("terminated")),
        info=single,
    )


# -- observations ----------------------------------------------------------------


def observe_batch(cfg: ScenarioConfig, b: BatchState) -> np.ndarray:
    """Flat observations for every agent of every instance: ``(E, N, F)``."""
    geo = geometry(cfg)
    E, N, _ = b.pos.shape
    parts = [b.pos, b.vel, b.carrying[..., None].astype(np.float64)]
    if N > 1:
        rel_p = b.pos[:, None, :, :] - b.pos[:, :, None, :]  # [e, i, j] = p_j - p_i
        rel_v = b.vel[:, None, :, :] - b.vel[:, :, None, :]
        idx = np.arange(N)[:, None]
        op = rel_p[:, idx, geo.others]  # (E, N, N-1, 2)
        ov = rel_v[:, idx, geo.others]
        parts.append(np.concatenate([op, ov], axis=-1).reshape(E, N, -1))
    if cfg.n_machines:
        rel_m = geo.access[None, None] - b.pos[:, :, None, :]  # (E, N, M, 2)
        ready = (b.phase == READY).astype(np.float64)
        ttr = np.where(b.phase == READY, 0.0, (geo.cycle - b.timer) / geo.cycle)
        feats = np.broadcast_to(np.stack([ready, ttr], axis=-1)[:, None], (E, N, cfg.n_machines, 2))
        parts.append(np.concatenate([rel_m, feats], axis=-1).reshape(E, N, -1))
    parts.append(geo.storage_center - b.pos)
    return np.concatenate(parts, axis=-1)


def tokens_from_flat(flat: np.ndarray, n_agents: int, n_machines: int) -> np.ndarray:
    """Entity-token view ``(..., T, TOKEN_WIDTH)`` of flat observations."""
    lead = flat.shape[:-1]
    n_tok = 1 + (n_agents - 1) + n_machines + 1
    tok = np.zeros(lead + (n_tok, TOKEN_WIDTH))
    tok[..., 0, TOKEN_SELF] = 1.0
    tok[..., 0, TOKEN_TYPES:TOKEN_TYPES + 5] = flat[..., 0:5]
    off, t = 5, 1
    for _ in range(n_agents - 1):
        tok[..., t, TOKEN_AGENT] = 1.0
        tok[..., t, TOKEN_TYPES:TOKEN_TYPES + 4] = flat[..., off:off + 4]
        off, t = off + 4, t + 1
    for _ in range(n_machines):
        tok[..., t, TOKEN_MACHINE] = 1.0
        tok[..., t, TOKEN_TYPES:TOKEN_TYPES + 4] = flat[..., off:off + 4]
        off, t = off + 4, t + 1
    tok[..., t, TOKEN_STORAGE] = 1.0
    tok[..., t, TOKEN_TYPES:TOKEN_TYPES + 2] = flat[..., off:off + 2]
    return tok


def observe(cfg: ScenarioConfig, state: WorldState, agent_index: int) -> Observation:
    if not 0 <= agent_index < cfg.n_agents:
        raise IndexError(f"agent_index {agent_index} out of range for {cfg.n_agents} agents")
    flat = observe_batch(cfg, BatchState.stack([state]))[0, agent_index]
    return Observation(flat=flat, tokens=tokens_from_flat(flat, cfg.n_agents, cfg.n_machines))


# -- centralized critic input ------------------------------------------------------


def global_state_batch(cfg: ScenarioConfig, b: BatchState) -> np.ndarray:
    geo = geometry(cfg)
    E = b.pos.shape[0]
    agents = np.concatenate([b.pos, b.vel, b.carrying[..., None].astype(np.float64)], axis=-1).reshape(E, -1)
    ready = (b.phase == READY).astype(np.float64)
    timer = np.where(b.phase == READY, 0.0, b.timer / geo.cycle)
    machines = np.concatenate(
        [np.broadcast_to(geo.access, (E,) + geo.access.shape), ready[..., None], timer[..., None]], axis=-1
    ).reshape(E, -1)
    storage = np.broadcast_to(geo.storage_center, (E, 2))
    clock = (b.step_index / cfg.max_steps)[:, None]
    return np.concatenate([agents, machines, storage, clock], axis=-1)


def global_state(cfg: ScenarioConfig, state: WorldState) -> np.ndarray:
    return global_state_batch(cfg, BatchState.stack([state]))[0]


def global_tokens(gs: np.ndarray, n_agents: int, n_machines: int) -> np.ndarray:
    """Entity tokens of a global-state vector: agents, machines, storage+clock."""
    lead = gs.shape[:-1]
    tok = np.zeros(lead + (n_agents + n_machines + 1, GLOBAL_TOKEN_WIDTH))
    off = 0
    for t in range(n_agents):
        tok[..., t, 0] = 1.0
        tok[..., t, 3:8] = gs[..., off:off + 5]
        off += 5
    for t in range(n_agents, n_agents + n_machines):
        tok[..., t, 1] = 1.0
        tok[..., t, 3:7] = gs[..., off:off + 4]
        off += 4
    tok[..., -1, 2] = 1.0
    tok[..., -1, 3:6] = gs[..., off:off + 3]
    return tok
