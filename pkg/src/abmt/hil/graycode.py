"""Reflected-binary gray code and projected-pattern localization."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def gray_encode(n: int, bits: int) -> int:
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    if not 0 <= n < (1 << bits):
        raise ValueError(f"cell index {n} out of range for {bits} bits")
    return n ^ (n >> 1)


def gray_decode(code: int, bits: int) -> int:
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    if not 0 <= code < (1 << bits):
        raise ValueError(f"codeword {code} out of range for {bits} bits")
    n = code
    shift = 1
    while shift < bits:
        n ^= n >> shift
        shift <<= 1
    return n


@dataclass(frozen=True)
class GrayCodeSchedule:
    """One bit-plane is projected per tick: all x planes, then all y planes.

    Within an axis planes go from the least to the most significant bit.
    Reading the coarse bits last keeps a fix taken while moving close to where
    the robot ended up: a mixed read of a reflected code lands between the
    mirror image of the early position and the late one.
    """

    bits: int = 10
    arena_extent: float = 1.0  # side length of the square arena, meters
    frame_ticks: int = 1

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        if self.frame_ticks < 1:
            raise ValueError("frame_ticks must be >= 1")

    @property
    def planes(self) -> int:
        return 2 * self.bits

    @property
    def fix_ticks(self) -> int:
        return self.planes * self.frame_ticks

    @property
    def cell_size(self) -> float:
        return self.arena_extent / (1 << self.bits)

    @property
    def cell_diagonal(self) -> float:
        return math.sqrt(2.0) * self.cell_size

    def plane_at(self, tick: int) -> tuple[int, int]:
        """``(axis, bit)`` projected at ``tick``."""
        plane = (tick // self.frame_ticks) % self.planes
        return divmod(plane, self.bits)

    def cell_of(self, coord: float) -> int:
        half = self.arena_extent / 2.0
        idx = int(math.floor((coord + half) / self.cell_size))
        return min(max(idx, 0), (1 << self.bits) - 1)

    def cell_center(self, idx: int) -> float:
        return -self.arena_extent / 2.0 + (idx + 0.5) * self.cell_size


@dataclass
class LocalizerState:
    estimate: np.ndarray  # (x, y, theta)
    age: int = 0  # ticks since the last completed fix
    code: list[int] | None = None  # codeword being assembled, per axis
    fixes: int = 0

    @classmethod
    def at(cls, pose) -> LocalizerState:
        return cls(estimate=np.array(pose, dtype=np.float64), code=[0, 0])


def localize_tick(
    state: LocalizerState,
    true_pose,
    schedule: GrayCodeSchedule,
    tick: int,
) -> bool:
    """Sample this tick's bit-plane at the robot's true position.

    Returns True when the sample completed a fix; the position estimate then
    jumps to the decoded cell center and its age resets. The heading is taken
    from the true pose at a fix (two photodiodes give orientation on the real
    robots). Between fixes the caller dead-reckons ``state.estimate``.
    """
    if state.code is None:
        state.code = [0, 0]
    axis, bit = schedule.plane_at(tick)
    codeword = gray_encode(schedule.cell_of(float(true_pose[axis])), schedule.bits)
    mask = 1 << bit
    state.code[axis] = (state.code[axis] & ~mask) | (codeword & mask)
    last_plane = (tick % schedule.frame_ticks == schedule.frame_ticks - 1) and axis == 1 and bit == schedule.bits - 1
    if not last_plane:
        state.age += 1
        return False
    x = schedule.cell_center(gray_decode(state.code[0], schedule.bits))
    y = schedule.cell_center(gray_decode(state.code[1], schedule.bits))
    state.estimate = np.array([x, y, float(true_pose[2])])
    state.age = 0
    state.fixes += 1
    return True
