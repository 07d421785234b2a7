"""Ground station + virtual robot fleet, advanced in lockstep ticks.

Per robot tick the actors run in a fixed order:

1. station: every ``sim_every`` ticks, step the scenario with the frozen
   policy and queue one Waypoint per robot (its twin's position, scaled);
2. channel: release due waypoints and this tick's pose reports, update the
   staleness ledgers;
3. robots: read frames, localize, drive one tick, emit a pose report.

Actors only exchange encoded BridgeFrames through the transport.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..env.scenario import ConfigError, ScenarioConfig
from ..env.world import make_rng, observe, reset_with_rng, step
from ..harness.metrics import BRIDGE_COLUMNS, write_metrics
from .channel import STATION, ChannelModel, ChannelState, comm_tick, inter_robot_staleness, send_waypoint
from .frames import POSE_REPORT, WAYPOINT, BridgeFrame, SeqCounter, SeqFilter, pose_report, waypoint
from .graycode import GrayCodeSchedule, LocalizerState, localize_tick
from .robot import RobotParams, RobotState, drive_tick
from .transport import LoopbackTransport

ORACLE = "oracle"
GRAYCODE = "graycode"


@dataclass(frozen=True)
class BridgeConfig:
    channel: ChannelModel = ChannelModel()
    schedule: GrayCodeSchedule = GrayCodeSchedule()
    robot: RobotParams = RobotParams()
    scale: float = 1.0 / 3.0
    localization: str = GRAYCODE
    wheel_noise: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> BridgeConfig:
        known = {"channel", "schedule", "robot", "scale", "localization", "wheel_noise"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown bridge keys: {sorted(unknown)}")
        kw = dict(d)
        try:
            if "channel" in kw:
                kw["channel"] = ChannelModel.from_dict(kw["channel"])
            if "schedule" in kw:
                kw["schedule"] = GrayCodeSchedule(**kw["schedule"])
            if "robot" in kw:
                kw["robot"] = RobotParams(**kw["robot"])
        except TypeError as e:
            raise ConfigError(f"bad bridge section: {e}") from e
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BridgeTrace:
    robot_pose: np.ndarray  # (T, n, 3) true pose after the tick
    estimate: np.ndarray  # (T, n, 3)
    waypoint: np.ndarray  # (T, n, 2), nan until the first waypoint arrives
    target: np.ndarray  # (T, n, 2) scaled twin position
    twin_carrying: np.ndarray  # (T, n) bool
    track_err: np.ndarray  # (T, n)
    pose_age: np.ndarray  # (T, n) per channel ledger; nan when undefined
    mirrored: np.ndarray  # (T, n) cumulative mirrored deliveries

    def equals(self, other: BridgeTrace) -> bool:
        return all(
            np.array_equal(getattr(self, k), getattr(other, k), equal_nan=getattr(self, k).dtype.kind == "f")
            for k in self.__dataclass_fields__
        )

    def rows(self) -> list[dict]:
        T, n = self.track_err.shape
        return [
            {
                "tick": t,
                "robot_id": i,
                "track_err_m": float(self.track_err[t, i]),
                "pose_age_ticks": float(self.pose_age[t, i]),
                "mirrored_deliveries": int(self.mirrored[t, i]),
            }
            for t in range(T)
            for i in range(n)
        ]


@dataclass
class BridgeMetrics:
    mean_track_err: list[float]
    max_track_err: list[float]
    mean_pose_staleness: float
    mean_inter_robot_staleness: float
    mirrored_deliveries: list[int]
    sim_deliveries: int
    fixes: list[int] = field(default_factory=list)
    frames_sent: int = 0

    def summary(self) -> str:
        return (
            f"track_err mean={np.mean(self.mean_track_err):.4f} max={np.max(self.max_track_err):.4f} m "
            f"pose_staleness={self.mean_pose_staleness:.3f} inter_robot_staleness={self.mean_inter_robot_staleness:.3f} "
            f"mirrored={sum(self.mirrored_deliveries)}/{self.sim_deliveries} sim deliveries"
        )


def _resolve_policy(policy, scenario: ScenarioConfig):
    if isinstance(policy, (str, Path)):
        from ..harness.checkpoint import load_checkpoint

        bundle = load_checkpoint(policy)
        if bundle.n_agents != scenario.n_agents:
            raise ConfigError(f"checkpoint has {bundle.n_agents} agents, scenario has {scenario.n_agents} robots")
        return load_checkpoint(policy, scenario)
    n = getattr(policy, "n_agents", None)
    if n is not None and n != scenario.n_agents:
        raise ConfigError(f"policy has {n} agents, scenario has {scenario.n_agents} robots")
    return policy


def _in_rect(p, rect) -> bool:
    return rect[0] <= p[0] <= rect[2] and rect[1] <= p[1] <= rect[3]


def run_bridge(
    scenario: ScenarioConfig,
    policy,
    config: BridgeConfig = BridgeConfig(),
    duration_ticks: int = 2500,
    seed: int = 0,
    transport=None,
    initial_poses=None,
    deterministic: bool = True,
    realtime: bool = False,
) -> tuple[BridgeTrace, BridgeMetrics]:
    """Mirror a running simulation on a virtual robot fleet.

    ``policy`` is a checkpoint path or anything with ``act_batch``.
    ``initial_poses`` overrides the robots' starting (x, y, theta) in arena
    coordinates; by default each robot starts on its twin with a random heading.
    ``realtime`` paces ticks by the wall clock (socket demos only).
    """
    policy = _resolve_policy(policy, scenario)
    if config.localization not in (ORACLE, GRAYCODE):
        raise ConfigError(f"localization must be '{ORACLE}' or '{GRAYCODE}', got {config.localization!r}")
    if duration_ticks < 0:
        raise ConfigError("duration_ticks must be >= 0")
    rp = config.robot
    sim_every = round(scenario.dt / rp.dt)
    if sim_every < 1 or not math.isclose(sim_every * rp.dt, scenario.dt, rel_tol=1e-9):
        raise ConfigError(f"sim dt {scenario.dt} must be a whole multiple of robot dt {rp.dt}")
    scale = config.scale
    arena = 2 * scenario.arena_half_extent * scale
    if config.localization == GRAYCODE and config.schedule.arena_extent + 1e-9 < arena:
        raise ConfigError(f"gray-code pattern covers {config.schedule.arena_extent} m but the arena is {arena} m")
    n = scenario.n_agents
    storage = tuple(v * scale for v in scenario.storage_rect)
    transport = LoopbackTransport() if transport is None else transport

    # ground station
    world = reset_with_rng(scenario, make_rng(seed, 3000))
    act_rng = make_rng(seed, 3001)
    station_seq = SeqCounter()
    station_filter = SeqFilter()
    station_view = np.full((n, 3), np.nan)
    sim_deliveries = 0

    # robots
    init_rng = make_rng(seed, 3002)
    if initial_poses is None:
        headings = init_rng.uniform(-math.pi, math.pi, n)
        initial_poses = [(world.pos[i, 0] * scale, world.pos[i, 1] * scale, headings[i]) for i in range(n)]
    elif len(initial_poses) != n:
        raise ConfigError(f"expected {n} initial poses, got {len(initial_poses)}")
    robots = [RobotState.at(p) for p in initial_poses]
    localizers = [LocalizerState.at(r.pose) for r in robots]
    robot_seq = [SeqCounter() for _ in range(n)]
    robot_filter = [SeqFilter() for _ in range(n)]
    pending: list[bytes | None] = [None] * n
    noise_rng = make_rng(seed, 3003)

    chan = ChannelState.create(n, seed)
    model = config.channel

    T = duration_ticks
    tr = BridgeTrace(
        robot_pose=np.zeros((T, n, 3)),
        estimate=np.zeros((T, n, 3)),
        waypoint=np.full((T, n, 2), np.nan),
        target=np.zeros((T, n, 2)),
        twin_carrying=np.zeros((T, n), dtype=bool),
        track_err=np.zeros((T, n)),
        pose_age=np.zeros((T, n)),
        mirrored=np.zeros((T, n), dtype=np.int64),
    )
    mirrored = np.zeros(n, dtype=np.int64)
    owed = np.zeros(n, dtype=bool)  # twin picked up a part the robot has not yet taken to storage
    was_carrying = world.carrying.copy()
    inter_sum, inter_count = 0.0, 0
    wall0 = time.monotonic()

    for t in range(T):
        t_ms = round(t * rp.dt * 1000)
        # 1. station
        for frame in transport.recv_all(STATION):
            f = BridgeFrame.decode(frame)
            if f.msg_type == POSE_REPORT and station_filter.accept(f):
                station_view[f.robot_id] = (f.x, f.y, f.theta)
        if t % sim_every == 0:
            if t > 0:
                obs = np.stack([observe(scenario, world, i).flat for i in range(n)])
                actions, _ = policy.act_batch(obs, act_rng, deterministic)
                out = step(scenario, world, actions)
                sim_deliveries += int(out.info["deliveries_this_step"])
                if out.terminated:
                    world = reset_with_rng(scenario, world.rng)
            for i in range(n):
                x, y = world.pos[i] * scale
                frame = waypoint(i, station_seq.next(i, WAYPOINT), t_ms, x, y).encode()
                send_waypoint(model, chan, i, frame, t)
        owed |= world.carrying & ~was_carrying
        was_carrying = world.carrying.copy()

        # 2. channel
        positions = np.array([r.pose[:2] for r in robots])
        res = comm_tick(model, chan, pending, t, positions)
        expected = np.zeros(n, dtype=np.int64)
        for rid, frame in res.waypoints:
            transport.send(rid, frame)
            expected[rid] += 1
        for receiver, _, frame in res.reports:
            transport.send(receiver, frame)
            if receiver != STATION:
                expected[receiver] += 1
        s = inter_robot_staleness(model, res, positions)
        if s is not None:
            inter_sum += s
            inter_count += 1

        # 3. robots
        for i, robot in enumerate(robots):
            for frame in transport.recv_all(i, int(expected[i])):
                f = BridgeFrame.decode(frame)
                if f.msg_type == WAYPOINT and robot_filter[i].accept(f):
                    robot.waypoint = np.array([f.x, f.y])
                # neighbor pose reports are only tallied through the channel ledger
            if config.localization == ORACLE:
                robot.estimate = robot.pose.copy()
                robot.estimate_age = 0
            elif localize_tick(localizers[i], robot.pose, config.schedule, t):
                robot.estimate = localizers[i].estimate.copy()
                robot.estimate_age = 0
            drive_tick(robot, None, rp, noise_rng=noise_rng, wheel_noise=config.wheel_noise)
            ex, ey, eth = robot.estimate
            pending[i] = pose_report(i, robot_seq[i].next(i, POSE_REPORT), t_ms, ex, ey, eth).encode()

        # bookkeeping
        target = world.pos * scale
        for i, robot in enumerate(robots):
            if owed[i] and _in_rect(robot.pose, storage):
                mirrored[i] += 1
                owed[i] = False
        tr.robot_pose[t] = [r.pose for r in robots]
        tr.estimate[t] = [r.estimate for r in robots]
        tr.waypoint[t] = [r.waypoint if r.waypoint is not None else (np.nan, np.nan) for r in robots]
        tr.target[t] = target
        tr.twin_carrying[t] = world.carrying
        tr.track_err[t] = np.linalg.norm(tr.robot_pose[t, :, :2] - target, axis=-1)
        tr.pose_age[t] = _pose_age(model, res, positions)
        tr.mirrored[t] = mirrored

        if realtime:
            lag = wall0 + (t + 1) * rp.dt - time.monotonic()
            if lag > 0:
                time.sleep(lag)

    finite = tr.pose_age[np.isfinite(tr.pose_age)]
    metrics = BridgeMetrics(
        mean_track_err=[float(v) for v in tr.track_err.mean(axis=0)] if T else [0.0] * n,
        max_track_err=[float(v) for v in tr.track_err.max(axis=0)] if T else [0.0] * n,
        mean_pose_staleness=float(finite.mean()) if finite.size else math.nan,
        mean_inter_robot_staleness=inter_sum / inter_count if inter_count else math.nan,
        mirrored_deliveries=[int(v) for v in mirrored],
        sim_deliveries=sim_deliveries,
        fixes=[loc.fixes for loc in localizers],
        frames_sent=transport.sent,
    )
    return tr, metrics


def _pose_age(model: ChannelModel, res, positions: np.ndarray) -> np.ndarray:
    """Staleness of each robot's pose at its receivers.

    Central: the station's age. Gossip: mean age at the neighbors currently in
    range (nan when the robot has none).
    """
    if model.kind == "central":
        return res.station_age.astype(np.float64)
    pos = np.asarray(positions)[:, :2]
    n = len(pos)
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    near = (dist <= model.neighbor_radius) & ~np.eye(n, dtype=bool)
    out = np.full(n, np.nan)
    for i in range(n):
        if near[:, i].any():
            out[i] = res.neighbor_age[near[:, i], i].mean()
    return out


def write_bridge_csv(trace: BridgeTrace, path: str | Path) -> Path:
    return write_metrics(trace.rows(), path, BRIDGE_COLUMNS)
