"""Fixed-point points on the unit circle / unit interval.

A point is stored as an unsigned 128-bit integer ``frac`` with value
``frac / 2**128``.  Wraparound arithmetic is exact modulo 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InsufficientDigits

BITS = 128
ONE = 1 << BITS
MASK = ONE - 1
HALF = 1 << (BITS - 1)
_M64 = (1 << 64) - 1


@dataclass(frozen=True, order=True)
class CirclePoint:
    frac: int

    def __post_init__(self):
        if not 0 <= self.frac < ONE:
            raise ValueError(f"frac out of range: {self.frac}")

    @classmethod
    def from_float(cls, x: float, clamp: bool = False) -> "CirclePoint":
        """Round down onto the 2^-128 grid.

        ``clamp=True`` maps x >= 1 to the largest representable point instead
        of wrapping (used for interval maps where 1.0 is a legal value).
        """
        if not math.isfinite(x):
            raise ValueError("non-finite input")
        if clamp:
            if x >= 1.0:
                return cls(MASK)
            if x <= 0.0:
                return cls(0)
        v = math.floor(Fraction(x) * ONE)
        return cls(v % ONE)

    @classmethod
    def from_fraction(cls, num: int, den: int) -> "CirclePoint":
        return cls(((num % den) * ONE // den) % ONE)

    @classmethod
    def from_hex(cls, s: str) -> "CirclePoint":
        s = s.strip().lower()
        if s.startswith("0x"):
            s = s[2:]
        if len(s) != 32:
            raise ValueError("expected 32 hex digits")
        return cls(int(s, 16))

    @classmethod
    def from_limbs(cls, hi, lo) -> "CirclePoint":
        return cls((int(hi) << 64) | int(lo))

    def hex(self) -> str:
        return f"{self.frac:032x}"

    def limbs(self) -> tuple[int, int]:
        return self.frac >> 64, self.frac & _M64

    def __float__(self) -> float:
        return self.frac / ONE

    @property
    def value(self) -> float:
        return self.frac / ONE

    def as_fraction(self) -> Fraction:
        return Fraction(self.frac, ONE)

    def __add__(self, other: "CirclePoint") -> "CirclePoint":
        return CirclePoint((self.frac + other.frac) & MASK)

    def __sub__(self, other: "CirclePoint") -> "CirclePoint":
        return CirclePoint((self.frac - other.frac) & MASK)

    def __neg__(self) -> "CirclePoint":
        return CirclePoint(-self.frac & MASK)

    def scale(self, k: int) -> "CirclePoint":
        """k * x mod 1 (exact on the 128-bit grid)."""
        return CirclePoint((self.frac * k) & MASK)

    def __repr__(self):
        return f"CirclePoint(0x{self.hex()} ~ {self.value:.17g})"


def _frac(p) -> int:
    return p.frac if isinstance(p, CirclePoint) else int(p)


def circle_distance_frac(a, b) -> int:
    """Circle distance in units of 2^-128, in [0, 2^127]."""
    d = (_frac(a) - _frac(b)) & MASK
    return min(d, ONE - d)


def interval_distance_frac(a, b) -> int:
    return abs(_frac(a) - _frac(b))


def circle_distance(a: CirclePoint, b: CirclePoint) -> float:
    """
    >>> circle_distance(CirclePoint.from_float(0.1), CirclePoint.from_float(0.9))
    0.2
    """
    return circle_distance_frac(a, b) / ONE


def interval_distance(a: CirclePoint, b: CirclePoint) -> float:
    return interval_distance_frac(a, b) / ONE


def threshold_frac(r: float) -> int:
    """Largest D with D / 2^128 < r, clamped to [-1, 2^128 - 1].

    A distance D (in 2^-128 units) is strictly below ``r`` iff D <= threshold.
    Exact because r * 2^128 is exactly representable for binary-64 r.
    """
    if r <= 0:
        return -1
    if r >= 1.0:
        return MASK
    t = math.ceil(r * float(ONE)) - 1
    return min(t, MASK)


class BitStreamPoint:
    """A point given by a finite digit expansion sum d_i k^-(i+1).

    Shifting the cursor by one applies x -> k x mod 1 exactly.
    """

    def __init__(self, digits, base: int = 2, cursor: int = 0):
        if base < 2:
            raise ValueError("base must be >= 2")
        d = np.asarray(digits, dtype=np.uint8 if base <= 256 else np.int64)
        if d.ndim != 1:
            raise ValueError("digits must be one-dimensional")
        if d.size and (int(d.max()) >= base):
            raise ValueError("digit out of range for base")
        self.digits = d
        self.base = base
        self.cursor = cursor

    @classmethod
    def from_string(cls, s: str, base: int = 2, pad: int = BITS) -> "BitStreamPoint":
        """``"1101"`` is 0.1101 in the given base, followed by ``pad`` zeros."""
        digs = [int(c, 36) for c in s] + [0] * pad
        return cls(digs, base)

    @classmethod
    def random(cls, rng: np.random.Generator, n_digits: int, base: int = 2) -> "BitStreamPoint":
        return cls(rng.integers(0, base, size=n_digits, dtype=np.int64).astype(np.uint8), base)

    def __len__(self):
        return int(self.digits.size)

    @property
    def available(self) -> int:
        """Number of further shifts that still leave 128 exact digits."""
        return len(self) - self.cursor - BITS

    def shift(self, n: int = 1) -> "BitStreamPoint":
        return BitStreamPoint(self.digits, self.base, self.cursor + n)

    def _window_value(self, start: int) -> int:
        w = self.digits[start:start + BITS]
        if self.base == 2:
            return int("".join("1" if v else "0" for v in w.tolist()), 2)
        v = 0
        for dgt in w.tolist():
            v = v * self.base + dgt
        return v

    def materialize(self, offset: int = 0) -> CirclePoint:
        """Leading 128-bit value of T^offset of this point.

        For base 2 this is the exact 128-bit prefix; for other bases it is the
        floor of the 128-digit window value on the 2^-128 grid.

        >>> p = BitStreamPoint.from_string("1101")
        >>> [p.materialize(k).value for k in range(3)]
        [0.8125, 0.625, 0.25]
        """
        start = self.cursor + offset
        if offset < 0 or start + BITS > len(self):
            raise InsufficientDigits(
                f"need {start + BITS} digits, stream has {len(self)}")
        v = self._window_value(start)
        if self.base == 2:
            return CirclePoint(v)
        return CirclePoint(v * ONE // self.base ** BITS)

    def value(self) -> Fraction:
        """Exact rational value of the finite expansion from the cursor on."""
        v = 0
        tail = self.digits[self.cursor:].tolist()
        for dgt in tail:
            v = v * self.base + dgt
        return Fraction(v, self.base ** len(tail))
