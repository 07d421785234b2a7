"""Bridge wire format.

Every frame is 22 bytes, little-endian, no padding::

    offset size  field
    0      u8    msg_type   0 = Waypoint, 1 = PoseReport
    1      u8    robot_id
    2      u32   seq        strictly increasing per (robot_id, msg_type)
    6      u32   t_sim_ms
    10     i32   x_mm
    14     i32   y_mm
    18     i32   theta_mrad (0 in Waypoint frames)
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass

WAYPOINT = 0
POSE_REPORT = 1

_FMT = struct.Struct("<BBIIiii")
FRAME_SIZE = _FMT.size

_U32 = (1 << 32) - 1
_I32 = (-(1 << 31), (1 << 31) - 1)


class FrameError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"frame {field}: {message}")
        self.field = field


@dataclass(frozen=True)
class BridgeFrame:
    msg_type: int
    robot_id: int
    seq: int
    t_sim_ms: int
    x_mm: int
    y_mm: int
    theta_mrad: int = 0

    def encode(self) -> bytes:
        if self.msg_type not in (WAYPOINT, POSE_REPORT):
            raise FrameError("msg_type", f"unknown message type {self.msg_type}")
        if not 0 <= self.robot_id <= 0xFF:
            raise FrameError("robot_id", f"{self.robot_id} does not fit in 8 bits")
        for name in ("seq", "t_sim_ms"):
            v = getattr(self, name)
            if not 0 <= v <= _U32:
                raise FrameError(name, f"{v} does not fit in u32")
        for name in ("x_mm", "y_mm", "theta_mrad"):
            v = getattr(self, name)
            if not _I32[0] <= v <= _I32[1]:
                raise FrameError(name, f"{v} does not fit in i32")
        if self.msg_type == WAYPOINT and self.theta_mrad != 0:
            raise FrameError("theta_mrad", "must be 0 in Waypoint frames")
        return _FMT.pack(self.msg_type, self.robot_id, self.seq, self.t_sim_ms, self.x_mm, self.y_mm, self.theta_mrad)

    @classmethod
    def decode(cls, data: bytes) -> BridgeFrame:
        if len(data) != FRAME_SIZE:
            raise FrameError("length", f"expected {FRAME_SIZE} bytes, got {len(data)}")
        frame = cls(*_FMT.unpack(data))
        if frame.msg_type not in (WAYPOINT, POSE_REPORT):
            raise FrameError("msg_type", f"unknown message type {frame.msg_type}")
        if frame.msg_type == WAYPOINT and frame.theta_mrad != 0:
            raise FrameError("theta_mrad", "must be 0 in Waypoint frames")
        return frame

    # -- unit helpers --------------------------------------------------------

    @property
    def x(self) -> float:
        return self.x_mm / 1000.0

    @property
    def y(self) -> float:
        return self.y_mm / 1000.0

    @property
    def theta(self) -> float:
        return self.theta_mrad / 1000.0


def waypoint(robot_id: int, seq: int, t_ms: int, x: float, y: float) -> BridgeFrame:
    return BridgeFrame(WAYPOINT, robot_id, seq, t_ms, round(x * 1000.0), round(y * 1000.0), 0)


def pose_report(robot_id: int, seq: int, t_ms: int, x: float, y: float, theta: float) -> BridgeFrame:
    theta = math.atan2(math.sin(theta), math.cos(theta))
    return BridgeFrame(POSE_REPORT, robot_id, seq, t_ms, round(x * 1000.0), round(y * 1000.0), round(theta * 1000.0))


class SeqFilter:
    """Receiver-side filter that drops frames older than the newest seen per stream."""

    def __init__(self):
        self._last: dict[tuple[int, int], int] = {}

    def accept(self, frame: BridgeFrame) -> bool:
        key = (frame.robot_id, frame.msg_type)
        last = self._last.get(key)
        if last is not None and frame.seq <= last:
            return False
        self._last[key] = frame.seq
        return True


class SeqCounter:
    """Sender-side per-stream sequence numbers."""

    def __init__(self):
        self._next: dict[tuple[int, int], int] = {}

    def next(self, robot_id: int, msg_type: int) -> int:
        key = (robot_id, msg_type)
        seq = self._next.get(key, 0)
        if seq > _U32:
            raise FrameError("seq", "sequence space exhausted")
        self._next[key] = seq + 1
        return seq
