import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from abmt.hil.frames import (
    FRAME_SIZE,
    POSE_REPORT,
    WAYPOINT,
    BridgeFrame,
    FrameError,
    SeqCounter,
    SeqFilter,
    pose_report,
    waypoint,
)

u32 = st.integers(0, 2**32 - 1)
i32 = st.integers(-(2**31), 2**31 - 1)


def test_layout():
    f = BridgeFrame(POSE_REPORT, 7, 258, 1000, -5, 6, 3141)
    data = f.encode()
    assert len(data) == FRAME_SIZE == 22
    assert data == struct.pack("<BBIIiii", 1, 7, 258, 1000, -5, 6, 3141)


@given(st.sampled_from([WAYPOINT, POSE_REPORT]), st.integers(0, 255), u32, u32, i32, i32, i32)
def test_roundtrip(kind, rid, seq, t, x, y, th):
    if kind == WAYPOINT:
        th = 0
    f = BridgeFrame(kind, rid, seq, t, x, y, th)
    data = f.encode()
    assert BridgeFrame.decode(data) == f
    assert BridgeFrame.decode(data).encode() == data


@given(st.binary(max_size=64).filter(lambda b: len(b) != FRAME_SIZE))
def test_bad_length(data):
    with pytest.raises(FrameError) as e:
        BridgeFrame.decode(data)
    assert e.value.field == "length"


@pytest.mark.parametrize(
    "data,field",
    [
        (struct.pack("<BBIIiii", 2, 0, 0, 0, 0, 0, 0), "msg_type"),
        (struct.pack("<BBIIiii", 0, 0, 0, 0, 0, 0, 5), "theta_mrad"),
    ],
)
def test_bad_content(data, field):
    with pytest.raises(FrameError) as e:
        BridgeFrame.decode(data)
    assert e.value.field == field


@pytest.mark.parametrize(
    "kw,field",
    [
        ({"robot_id": 256}, "robot_id"),
        ({"seq": -1}, "seq"),
        ({"t_sim_ms": 2**32}, "t_sim_ms"),
        ({"x_mm": 2**31}, "x_mm"),
        ({"msg_type": 9}, "msg_type"),
    ],
)
def test_encode_rejects(kw, field):
    base = dict(msg_type=POSE_REPORT, robot_id=0, seq=0, t_sim_ms=0, x_mm=0, y_mm=0, theta_mrad=0)
    base.update(kw)
    with pytest.raises(FrameError) as e:
        BridgeFrame(**base).encode()
    assert e.value.field == field


def test_unit_helpers():
    f = pose_report(1, 0, 0, 0.1234, -0.0005, 4.0)
    assert (f.x_mm, f.y_mm) == (123, 0)
    assert -3142 <= f.theta_mrad <= 3142 and f.theta == pytest.approx(4.0 - 2 * 3.141592653589793, abs=1e-3)
    w = waypoint(2, 3, 40, 0.2, 0.3)
    assert (w.x, w.y, w.theta_mrad) == (0.2, 0.3, 0)


def test_seq_filter_and_counter():
    c = SeqCounter()
    assert [c.next(0, WAYPOINT) for _ in range(3)] == [0, 1, 2]
    assert c.next(1, WAYPOINT) == 0 and c.next(0, POSE_REPORT) == 0
    flt = SeqFilter()
    fr = lambda seq, rid=0, kind=WAYPOINT: BridgeFrame(kind, rid, seq, 0, 0, 0, 0)
    assert flt.accept(fr(0)) and flt.accept(fr(2))
    assert not flt.accept(fr(2)) and not flt.accept(fr(1))
    assert flt.accept(fr(0, rid=1)) and flt.accept(fr(0, kind=POSE_REPORT))
