import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abmt.hil.robot import RobotParams, RobotState, command, drive_tick, wheel_speeds, wrap_angle

P = RobotParams()


def test_defaults():
    assert (P.wheel_base, P.v_max, P.omega_max, P.k_v, P.k_omega, P.dt, P.deadband) == (
        0.02, 0.1, 6.0, 2.0, 4.0, 0.02, 0.01
    )
    assert P.alignment_ticks() == 14


@given(st.floats(-100, 100))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_at_waypoint_stops():
    r = RobotState.at([0.1, 0.1, 0.3])
    drive_tick(r, [0.1, 0.1])
    assert np.array_equal(r.wheels, [0.0, 0.0])
    assert command([0, 0, 0], [0.005, 0.0], P) == (0.0, 0.0)


def test_dead_ahead_drives_straight():
    v, w = command([0, 0, 0], [0.5, 0.0], P)
    assert v == P.v_max and w == 0.0
    left, right = wheel_speeds(v, w, P)
    assert left == right == P.v_max


def test_behind_rotates_in_place():
    r = RobotState.at([0.0, 0.0, 0.0])
    goal = np.array([-0.3, 0.0])
    v, w = command(r.estimate, goal, P)
    assert v == 0.0 and abs(w) == P.omega_max
    err = abs(wrap_angle(math.atan2(0, -0.3) - r.pose[2]))
    for _ in range(P.alignment_ticks()):
        drive_tick(r, goal)
        new = abs(wrap_angle(math.atan2(goal[1] - r.pose[1], goal[0] - r.pose[0]) - r.pose[2]))
        assert new < err
        err = new


@given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(-math.pi, math.pi), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_distance_strictly_decreasing_after_alignment(x, y, th, gx, gy):
    r = RobotState.at([x, y, th])
    goal = np.array([gx, gy])
    for _ in range(P.alignment_ticks()):
        drive_tick(r, goal)
    d = r.distance_to_waypoint()
    for _ in range(600):
        if d < P.deadband:
            break
        drive_tick(r, goal)
        nd = r.distance_to_waypoint()
        assert nd < d
        d = nd
    assert d < P.deadband


@given(st.floats(-1, 1), st.floats(-50, 50))
def test_wheel_cap(v, w):
    left, right = wheel_speeds(v, w, P)
    assert max(abs(left), abs(right)) <= P.v_max + 1e-15


def test_theta_stays_normalized():
    r = RobotState.at([0.0, 0.0, 3.1])
    for k in range(300):
        drive_tick(r, [0.2 * math.cos(k / 10), 0.2 * math.sin(k / 10)])
        assert -math.pi < r.pose[2] <= math.pi


def test_noise_only_moves_true_pose():
    r = RobotState.at([0.0, 0.0, 0.0])
    for _ in range(20):
        drive_tick(r, [0.3, 0.1], noise_rng=np.random.default_rng(0), wheel_noise=0.2)
    assert not np.allclose(r.pose, r.estimate)
    assert r.estimate_age == 20


def test_bad_dt():
    with pytest.raises(ValueError):
        drive_tick(RobotState.at([0, 0, 0]), [1, 1], dt=0.0)
