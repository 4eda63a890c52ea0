"""6-bit Fibonacci LFSR used as the shared random weight source."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ZeroStateError
from .fxp import FIX_4_3, FxValue

WIDTH = 6
MASK = (1 << WIDTH) - 1
DEFAULT_TAPS = (6, 5)
DEFAULT_SEED = 0b000001

# Fix_4_3 grid points inside [-0.4, 0.4], ascending
WEIGHT_GRID = tuple(FxValue(raw, FIX_4_3) for raw in range(-3, 4))


@dataclass(frozen=True, slots=True)
class Lfsr6:
    state: int = DEFAULT_SEED
    taps: tuple[int, ...] = DEFAULT_TAPS

    def __post_init__(self):
        if not 0 <= self.state <= MASK:
            raise ValueError(f"state must fit in {WIDTH} bits, got {self.state}")
        if self.state == 0:
            raise ZeroStateError("LFSR state 0 is absorbing")
        if not self.taps or any(not 1 <= t <= WIDTH for t in self.taps):
            raise ValueError(f"taps must be bit positions 1..{WIDTH}, got {self.taps}")


def feedback_bit(state: int, taps) -> int:
    bit = 0
    for t in taps:
        bit ^= (state >> (t - 1)) & 1
    return bit


def step(lfsr: Lfsr6) -> tuple[Lfsr6, int]:
    """Shift left by one; the XOR of the tapped bits enters bit 1.

    Returns the new register and its 6-bit value.
    """
    new = ((lfsr.state << 1) | feedback_bit(lfsr.state, lfsr.taps)) & MASK
    return Lfsr6(new, lfsr.taps), new


def weight_from_state(state: int) -> FxValue:
    return WEIGHT_GRID[state % len(WEIGHT_GRID)]


def sample_weight(lfsr: Lfsr6) -> FxValue:
    """Map the current register onto the Fix_4_3 grid in [-0.375, 0.375]."""
    return weight_from_state(lfsr.state)


def draw(lfsr: Lfsr6, n: int) -> tuple[Lfsr6, list[FxValue]]:
    """Advance ``n`` times, returning one weight sample per advance."""
    out = []
    for _ in range(n):
        lfsr, _ = step(lfsr)
        out.append(sample_weight(lfsr))
    return lfsr, out


def cycle(lfsr: Lfsr6) -> list[FxValue]:
    """Weight samples for one full period, starting with the first advance."""
    out = []
    for _ in range(period(lfsr)):
        lfsr, _ = step(lfsr)
        out.append(sample_weight(lfsr))
    return out


def period(lfsr: Lfsr6, limit: int = 1 << WIDTH) -> int:
    start = lfsr.state
    for i in range(1, limit + 1):
        lfsr, s = step(lfsr)
        if s == start:
            return i
    raise RuntimeError("no period found within limit")
