"""Communication models between the ground station and the robot fleet.

``central``: a single antenna at the station polls ``capacity`` robots per
tick in round-robin order; only polled robots' pose reports get through.
``gossip``: every robot broadcasts its pose each tick and every other robot
within ``neighbor_radius`` receives it with probability ``link_prob``.

In both modes waypoints travel station -> robot losslessly after a fixed
``waypoint_delay`` ticks.
"""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from ..env.scenario import ConfigError
from ..env.world import make_rng

CENTRAL = "central"
GOSSIP = "gossip"
STATION = -1  # receiver id of the ground station


@dataclass(frozen=True)
class ChannelModel:
    kind: str = CENTRAL
    capacity: int = 1
    neighbor_radius: float = 0.6
    link_prob: float = 1.0
    waypoint_delay: int = 1

    def __post_init__(self):
        if self.kind not in (CENTRAL, GOSSIP):
            raise ConfigError(f"channel kind must be '{CENTRAL}' or '{GOSSIP}', got {self.kind!r}")
        if self.capacity < 1:
            raise ConfigError(f"channel capacity must be >= 1, got {self.capacity}")
        if not 0.0 <= self.link_prob <= 1.0:
            raise ConfigError(f"link_prob must be in [0, 1], got {self.link_prob}")
        if self.neighbor_radius < 0:
            raise ConfigError("neighbor_radius must be >= 0")
        if self.waypoint_delay < 0:
            raise ConfigError("waypoint_delay must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> ChannelModel:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown channel keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ChannelState:
    """Per-run delivery state. Ages start at 0: every pose is known at startup."""

    n_robots: int
    station_age: np.ndarray  # (n,) ticks since the station last heard robot i
    neighbor_age: np.ndarray  # (n, n) [i, j] = age of robot j's pose at robot i
    rng: np.random.Generator
    next_poll: int = 0
    waypoints: deque = field(default_factory=deque)  # (due_tick, robot_id, frame bytes)

    @classmethod
    def create(cls, n_robots: int, seed: int) -> ChannelState:
        return cls(
            n_robots=n_robots,
            station_age=np.zeros(n_robots, dtype=np.int64),
            neighbor_age=np.zeros((n_robots, n_robots), dtype=np.int64),
            rng=make_rng(seed, 4000),
        )


@dataclass
class CommResult:
    reports: list[tuple[int, int, bytes]]  # (receiver, sender, frame); receiver STATION or robot id
    waypoints: list[tuple[int, bytes]]  # (robot_id, frame) due this tick
    station_age: np.ndarray
    neighbor_age: np.ndarray
    polled: list[int]


def send_waypoint(model: ChannelModel, state: ChannelState, robot_id: int, frame: bytes, tick: int) -> None:
    state.waypoints.append((tick + model.waypoint_delay, robot_id, frame))


def comm_tick(
    model: ChannelModel,
    state: ChannelState,
    reports: list[bytes | None],
    tick: int,
    positions: np.ndarray,
) -> CommResult:
    """Deliver this tick's traffic and update the staleness ledgers.

    ``reports[i]`` is robot i's current pose report (None if it has none);
    ``positions`` are true robot positions, used for gossip range checks.
    """
    n = state.n_robots
    if len(reports) != n:
        raise ValueError(f"expected {n} reports, got {len(reports)}")
    out: list[tuple[int, int, bytes]] = []
    polled: list[int] = []

    if model.kind == CENTRAL:
        state.station_age += 1
        for _ in range(min(model.capacity, n)):
            i = state.next_poll
            state.next_poll = (state.next_poll + 1) % n
            polled.append(i)
            if reports[i] is not None:
                out.append((STATION, i, reports[i]))
                state.station_age[i] = 0
    else:
        state.neighbor_age += 1
        pos = np.asarray(positions, dtype=np.float64)[:, :2]
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        # one draw per ordered pair every tick keeps the stream independent of geometry
        draws = state.rng.random((n, n))
        for j in range(n):  # sender
            if reports[j] is None:
                continue
            for i in range(n):  # receiver
                if i != j and dist[i, j] <= model.neighbor_radius and draws[i, j] < model.link_prob:
                    out.append((i, j, reports[j]))
                    state.neighbor_age[i, j] = 0
        np.fill_diagonal(state.neighbor_age, 0)

    due = []
    while state.waypoints and state.waypoints[0][0] <= tick:
        _, rid, frame = state.waypoints.popleft()
        due.append((rid, frame))

    return CommResult(out, due, state.station_age.copy(), state.neighbor_age.copy(), polled)


def inter_robot_staleness(model: ChannelModel, result: CommResult, positions: np.ndarray) -> float | None:
    """Mean age of j's pose as known by i, over ordered pairs currently within range.

    Under ``central`` robots only learn each other's poses through the station,
    so the age is the station's age plus the downlink delay. Returns None when
    no pair is in range.
    """
    pos = np.asarray(positions, dtype=np.float64)[:, :2]
    n = len(pos)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    pairs = (dist <= model.neighbor_radius) & ~np.eye(n, dtype=bool)
    if not pairs.any():
        return None
    if model.kind == CENTRAL:
        ages = np.broadcast_to(result.station_age[None, :] + model.waypoint_delay, (n, n))
    else:
        ages = result.neighbor_age
    return float(ages[pairs].mean())
