"""Virtual differential-drive robot and its waypoint controller."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(a: float) -> float:
    """Map to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class RobotParams:
    wheel_base: float = 0.02
    v_max: float = 0.1  # also the per-wheel speed cap
    omega_max: float = 6.0
    k_v: float = 2.0
    k_omega: float = 4.0
    dt: float = 0.02
    deadband: float = 0.01

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.wheel_base <= 0 or self.v_max <= 0 or self.omega_max <= 0:
            raise ValueError("wheel_base, v_max and omega_max must be > 0")

    def alignment_ticks(self) -> int:
        """Worst-case ticks of in-place rotation before forward motion starts.

        From a heading error of pi the robot turns at omega_max (the gain
        saturates above pi/2) until the error drops below pi/2; from then on
        the distance to a fixed waypoint shrinks every tick.
        """
        return math.ceil((math.pi / 2) / (self.omega_max * self.dt))


@dataclass
class RobotState:
    pose: np.ndarray  # true (x, y, theta)
    estimate: np.ndarray  # what the robot believes, (x, y, theta)
    wheels: np.ndarray = field(default_factory=lambda: np.zeros(2))  # commanded (left, right)
    waypoint: np.ndarray | None = None
    estimate_age: int = 0

    @classmethod
    def at(cls, pose) -> RobotState:
        p = np.array(pose, dtype=np.float64)
        p[2] = wrap_angle(p[2])
        return cls(pose=p, estimate=p.copy())

    def distance_to_waypoint(self) -> float:
        if self.waypoint is None:
            return 0.0
        return float(np.hypot(*(self.waypoint - self.pose[:2])))


def command(estimate, waypoint, params: RobotParams) -> tuple[float, float]:
    """P controller: ``(v, omega)`` toward ``waypoint`` from the believed pose."""
    dx = float(waypoint[0] - estimate[0])
    dy = float(waypoint[1] - estimate[1])
    d = math.hypot(dx, dy)
    if d < params.deadband:
        return 0.0, 0.0
    alpha = wrap_angle(math.atan2(dy, dx) - float(estimate[2]))
    v = 0.0 if abs(alpha) > math.pi / 2 else min(max(params.k_v * d * math.cos(alpha), 0.0), params.v_max)
    omega = min(max(params.k_omega * alpha, -params.omega_max), params.omega_max)
    return v, omega


def wheel_speeds(v: float, omega: float, params: RobotParams) -> tuple[float, float]:
    left = v - omega * params.wheel_base / 2
    right = v + omega * params.wheel_base / 2
    peak = max(abs(left), abs(right))
    if peak > params.v_max:
        # joint rescale keeps the v/omega ratio
        s = params.v_max / peak
        left, right = left * s, right * s
    return left, right


def _integrate(pose: np.ndarray, left: float, right: float, params: RobotParams, dt: float) -> np.ndarray:
    v = (left + right) / 2
    omega = (right - left) / params.wheel_base
    x, y, th = pose
    return np.array([x + v * math.cos(th) * dt, y + v * math.sin(th) * dt, wrap_angle(th + omega * dt)])


def drive_tick(
    robot: RobotState,
    waypoint,
    params: RobotParams = RobotParams(),
    dt: float | None = None,
    noise_rng: np.random.Generator | None = None,
    wheel_noise: float = 0.0,
) -> RobotState:
    """One control tick, in place.

    The command is computed from the pose estimate. The true pose integrates
    the commanded wheel speeds (plus optional multiplicative wheel slip); the
    estimate dead-reckons the commanded speeds only.
    """
    dt = params.dt if dt is None else dt
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if waypoint is not None:
        robot.waypoint = np.asarray(waypoint, dtype=np.float64)
    if robot.waypoint is None:
        left = right = 0.0
    else:
        left, right = wheel_speeds(*command(robot.estimate, robot.waypoint, params), params)
    robot.wheels = np.array([left, right])
    true_l, true_r = left, right
    if noise_rng is not None and wheel_noise > 0:
        slip = 1.0 + wheel_noise * noise_rng.standard_normal(2)
        true_l, true_r = left * slip[0], right * slip[1]
    robot.pose = _integrate(robot.pose, true_l, true_r, params, dt)
    robot.estimate = _integrate(robot.estimate, left, right, params, dt)
    robot.estimate_age += 1
    return robot
