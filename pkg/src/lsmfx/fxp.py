"""
Signed fixed-point arithmetic in Q(total, frac) formats.

Values are stored as two's-complement integers (``raw``) with an implied
binary point ``frac`` bits from the right. All arithmetic is exact on the
integers; results that leave the representable range are clamped to the
range limits (saturation) and carry ``saturated=True`` for diagnostics.
Rounding is round-half-to-even everywhere a value is re-quantized.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import RangeError

_FORMAT_RE = re.compile(r"^Fix_(\d+)_(\d+)$")


class Overflow(enum.Enum):
    SATURATE = "saturate"
    ERROR = "error"


@dataclass(frozen=True, slots=True)
class FxFormat:
    total_bits: int
    frac_bits: int
    raw_min: int = field(init=False, repr=False, compare=False)
    raw_max: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise ValueError(f"total_bits must be in 2..32, got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError(
                f"frac_bits must be in 0..{self.total_bits - 1}, got {self.frac_bits}")
        object.__setattr__(self, "raw_min", -(1 << (self.total_bits - 1)))
        object.__setattr__(self, "raw_max", (1 << (self.total_bits - 1)) - 1)

    @classmethod
    def parse(cls, text: str) -> "FxFormat":
        """Parse a ``Fix_T_F`` string, e.g. ``"Fix_18_12"``."""
        m = _FORMAT_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not a fixed-point format string: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def step(self) -> Fraction:
        return Fraction(1, 1 << self.frac_bits)

    @property
    def min_value(self) -> Fraction:
        return self.raw_min * self.step

    @property
    def max_value(self) -> Fraction:
        return self.raw_max * self.step

    def clamp(self, raw: int) -> tuple[int, bool]:
        if raw > self.raw_max:
            return self.raw_max, True
        if raw < self.raw_min:
            return self.raw_min, True
        return raw, False

    def __str__(self):
        return f"Fix_{self.total_bits}_{self.frac_bits}"


FIX_18_12 = FxFormat(18, 12)
FIX_4_3 = FxFormat(4, 3)


@dataclass(frozen=True, slots=True)
class FxValue:
    raw: int
    fmt: FxFormat
    saturated: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not self.fmt.raw_min <= self.raw <= self.fmt.raw_max:
            raise RangeError(f"raw {self.raw} does not fit {self.fmt}")

    @classmethod
    def from_raw(cls, raw: int, fmt: FxFormat) -> "FxValue":
        clamped, flag = fmt.clamp(raw)
        return cls(clamped, fmt, flag)

    @property
    def exact(self) -> Fraction:
        return Fraction(self.raw, 1 << self.fmt.frac_bits)

    @property
    def value(self) -> float:
        return self.raw / (1 << self.fmt.frac_bits)

    def __float__(self):
        return self.value

    def __lt__(self, other: "FxValue") -> bool:
        _check_same(self, other)
        return self.raw < other.raw

    def __le__(self, other: "FxValue") -> bool:
        _check_same(self, other)
        return self.raw <= other.raw

    def __gt__(self, other: "FxValue") -> bool:
        _check_same(self, other)
        return self.raw > other.raw

    def __ge__(self, other: "FxValue") -> bool:
        _check_same(self, other)
        return self.raw >= other.raw

    def __repr__(self):
        return f"FxValue({self.value!r}, raw={self.raw}, {self.fmt})"


def _check_same(a: FxValue, b: FxValue) -> None:
    if a.fmt is not b.fmt and a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")


def round_half_even_shift(n: int, k: int) -> int:
    """Divide ``n`` by ``2**k`` rounding half to even."""
    if k <= 0:
        return n << -k
    q, r = divmod(n, 1 << k)
    half = 1 << (k - 1)
    if r > half or (r == half and q & 1):
        q += 1
    return q


def quantize(x, fmt: FxFormat, policy: Overflow = Overflow.SATURATE) -> FxValue:
    """Round ``x`` to the nearest grid point of ``fmt`` (ties to even).

    ``x`` may be a float, int, or Fraction; conversion is exact.
    """
    raw = round(Fraction(x) * (1 << fmt.frac_bits))
    clamped, flag = fmt.clamp(raw)
    if flag and policy is Overflow.ERROR:
        raise RangeError(
            f"{x!r} outside the range of {fmt} [{float(fmt.min_value)}, {float(fmt.max_value)}]")
    return FxValue(clamped, fmt, flag)


def widen(a: FxValue, fmt: FxFormat) -> FxValue:
    """Re-express ``a`` in a format with at least as many fractional bits."""
    shift = fmt.frac_bits - a.fmt.frac_bits
    if shift < 0:
        raise ValueError(f"cannot widen {a.fmt} to {fmt} without rounding")
    return FxValue.from_raw(a.raw << shift, fmt)


def add(a: FxValue, b: FxValue) -> FxValue:
    _check_same(a, b)
    return FxValue.from_raw(a.raw + b.raw, a.fmt)


def sub(a: FxValue, b: FxValue) -> FxValue:
    _check_same(a, b)
    return FxValue.from_raw(a.raw - b.raw, a.fmt)


def neg(a: FxValue) -> FxValue:
    # -raw_min does not fit; saturates to raw_max
    return FxValue.from_raw(-a.raw, a.fmt)


def shr(a: FxValue, k: int) -> FxValue:
    """Arithmetic shift right: floor(raw / 2**k)."""
    if not 0 <= k < a.fmt.total_bits:
        raise ValueError(f"shift {k} out of range for {a.fmt}")
    return FxValue(a.raw >> k, a.fmt)


def mul_const(a: FxValue, c: FxValue) -> FxValue:
    """Multiply by a constant; the product is re-quantized to ``a``'s format."""
    product = a.raw * c.raw
    frac = a.fmt.frac_bits + c.fmt.frac_bits
    raw = round_half_even_shift(product, frac - a.fmt.frac_bits)
    return FxValue.from_raw(raw, a.fmt)


def sum_saturating(values, fmt: FxFormat) -> FxValue:
    """Left-to-right saturating sum; the empty sum is zero."""
    acc = FxValue(0, fmt)
    for v in values:
        if v.raw:  # adding zero to an in-range accumulator is a no-op
            acc = add(acc, v)
    return acc


def zero(fmt: FxFormat) -> FxValue:
    return FxValue(0, fmt)
