"""Orbit generators for the built-in circle and interval maps."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from math import isqrt

import numpy as np

from . import _kernels as K
from .circlepoint import BITS, MASK, ONE, BitStreamPoint, CirclePoint
from .errors import ConfigError, DomainError, InsufficientDigits

_M64 = (1 << 64) - 1


class Metric(enum.Enum):
    CIRCLE = "circle"
    INTERVAL = "interval"


class Exactness(enum.Enum):
    EXACT = "exact"
    FLOAT64_SHADOW = "float64-shadow"


class SystemKind(enum.Enum):
    KARY = "kary"
    ROTATION = "rotation"
    LOGISTIC4 = "logistic4"
    GAUSS = "gauss"


class MeasureKind(enum.Enum):
    LEBESGUE = "lebesgue"
    GAUSS = "gauss"
    LOGISTIC4_ACIM = "logistic4"


# exact 128-bit fractional parts of two quadratic irrationals
GOLDEN_FRAC = (isqrt(5 << (2 * BITS)) - ONE) // 2      # (sqrt5 - 1)/2
SQRT2M1_FRAC = isqrt(2 << (2 * BITS)) - ONE            # sqrt2 - 1
NAMED_ALPHAS = {"golden": GOLDEN_FRAC, "sqrt2-1": SQRT2M1_FRAC}


@dataclass(frozen=True)
class MeasureSpec:
    kind: MeasureKind
    support: tuple[float, float] = (0.0, 1.0)

    @classmethod
    def parse(cls, name: str) -> "MeasureSpec":
        try:
            return cls(MeasureKind(name.strip().lower()))
        except ValueError:
            raise ConfigError(f"unknown measure {name!r}") from None

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.kind is MeasureKind.LEBESGUE:
            out = x
        elif self.kind is MeasureKind.GAUSS:
            out = np.log2(1.0 + x)
        else:
            out = (2.0 / np.pi) * np.arcsin(np.sqrt(x))
        return out if out.ndim else float(out)

    def inv_cdf(self, u):
        """
        >>> MeasureSpec(MeasureKind.GAUSS).inv_cdf(1.0)
        1.0
        """
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if self.kind is MeasureKind.LEBESGUE:
            out = u
        elif self.kind is MeasureKind.GAUSS:
            out = np.exp2(u) - 1.0
        else:
            out = np.sin(0.5 * np.pi * u) ** 2
        return out if out.ndim else float(out)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind is MeasureKind.LEBESGUE:
            out = np.ones_like(x)
        elif self.kind is MeasureKind.GAUSS:
            out = 1.0 / ((1.0 + x) * math.log(2.0))
        else:
            with np.errstate(divide="ignore"):
                out = 1.0 / (np.pi * np.sqrt(x * (1.0 - x)))
        out = np.where((x < 0) | (x > 1), 0.0, out)
        return out if out.ndim else float(out)

    @property
    def default_metric(self) -> Metric:
        return Metric.CIRCLE if self.kind is MeasureKind.LEBESGUE else Metric.INTERVAL


LEBESGUE = MeasureSpec(MeasureKind.LEBESGUE)
GAUSS_MEASURE = MeasureSpec(MeasureKind.GAUSS)
LOGISTIC4_ACIM = MeasureSpec(MeasureKind.LOGISTIC4_ACIM)


@dataclass(frozen=True)
class SystemSpec:
    kind: SystemKind
    k: int = 2
    alpha: CirclePoint | None = None
    alpha_tag: str | None = None
    metric: Metric = None
    exactness: Exactness = field(init=False)

    def __post_init__(self):
        exact = self.kind in (SystemKind.KARY, SystemKind.ROTATION)
        object.__setattr__(self, "exactness",
                           Exactness.EXACT if exact else Exactness.FLOAT64_SHADOW)
        if self.metric is None:
            object.__setattr__(self, "metric", Metric.CIRCLE if exact else Metric.INTERVAL)
        if self.kind is SystemKind.KARY and self.k < 2:
            raise ConfigError("k-ary map needs k >= 2")
        if self.kind is SystemKind.ROTATION and self.alpha is None:
            raise ConfigError("rotation needs an angle")

    @classmethod
    def parse(cls, name: str, metric: str | Metric | None = None) -> "SystemSpec":
        """Parse ``kary:2``, ``rotation:golden``, ``rotation:hex:<32 hex>``,
        ``logistic4`` or ``gauss``."""
        if isinstance(metric, str):
            metric = Metric(metric)
        parts = name.strip().split(":")
        head = parts[0].lower()
        try:
            if head == "kary":
                return cls(SystemKind.KARY, k=int(parts[1]) if len(parts) > 1 else 2, metric=metric)
            if head == "rotation":
                if len(parts) < 2:
                    raise ConfigError("rotation needs an angle")
                tag = parts[1].lower()
                if tag in NAMED_ALPHAS:
                    return cls(SystemKind.ROTATION, alpha=CirclePoint(NAMED_ALPHAS[tag]),
                               alpha_tag=tag, metric=metric)
                if tag == "hex":
                    return cls(SystemKind.ROTATION, alpha=CirclePoint.from_hex(parts[2]),
                               metric=metric)
                return cls(SystemKind.ROTATION, alpha=CirclePoint.from_float(float(parts[1])),
                           metric=metric)
            if head == "logistic4" and len(parts) == 1:
                return cls(SystemKind.LOGISTIC4, metric=metric)
            if head == "gauss" and len(parts) == 1:
                return cls(SystemKind.GAUSS, metric=metric)
        except (ValueError, IndexError) as e:
            raise ConfigError(f"bad system {name!r}: {e}") from None
        raise ConfigError(f"unknown system {name!r}")

    @property
    def name(self) -> str:
        if self.kind is SystemKind.KARY:
            return f"kary:{self.k}"
        if self.kind is SystemKind.ROTATION:
            return f"rotation:{self.alpha_tag}" if self.alpha_tag else f"rotation:hex:{self.alpha.hex()}"
        return self.kind.value

    @property
    def measure(self) -> MeasureSpec:
        if self.kind is SystemKind.LOGISTIC4:
            return LOGISTIC4_ACIM
        if self.kind is SystemKind.GAUSS:
            return GAUSS_MEASURE
        return LEBESGUE

    @property
    def circle(self) -> bool:
        return self.metric is Metric.CIRCLE


def _logistic(x: float) -> float:
    return 4.0 * x * (1.0 - x)


def _gauss(x: float) -> float:
    if x == 0.0:
        raise DomainError("Gauss map is undefined at 0")
    y = 1.0 / x
    return y - math.floor(y)


def iterate(system: SystemSpec, p, steps: int = 1):
    """Apply the map ``steps`` times.

    KAry takes a BitStreamPoint (exact shift) or a CirclePoint (exact on the
    128-bit grid, trailing digits taken as zero); Rotation a CirclePoint;
    Logistic4 and Gauss a float.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    kind = system.kind
    if kind is SystemKind.KARY:
        if isinstance(p, BitStreamPoint):
            if p.base != system.k:
                raise ValueError("digit base does not match the map")
            q = p.shift(steps)
            if q.available < 0:
                raise InsufficientDigits("stream exhausted")
            return q
        return CirclePoint(p.frac * system.k ** steps & MASK)
    if kind is SystemKind.ROTATION:
        return CirclePoint((p.frac + steps * system.alpha.frac) & MASK)
    x = float(p)
    f = _logistic if kind is SystemKind.LOGISTIC4 else _gauss
    for _ in range(steps):
        x = f(x)
    return x


def sample_seed(measure: MeasureSpec, rng: np.random.Generator) -> float:
    """Draw one point from ``measure`` by inverse-CDF sampling."""
    return measure.inv_cdf(rng.random())


def _float_to_limbs(x: np.ndarray):
    """Quantize floats in [0, 1] to 128-bit limbs (floor; 1.0 -> 2^128 - 1)."""
    x = np.asarray(x, dtype=np.float64)
    top = x >= 1.0
    s = np.ldexp(np.where(top, 0.0, x), 64)
    hi_f = np.floor(s)
    lo_f = np.ldexp(s - hi_f, 64)
    hi = hi_f.astype(np.uint64)
    lo = lo_f.astype(np.uint64)
    hi[top] = np.uint64(_M64)
    lo[top] = np.uint64(_M64)
    return hi, lo


def _bits_from_digits(digits: np.ndarray, m: int) -> np.ndarray:
    """Expand base-2^m digits into a big-endian bit array."""
    d = digits.astype(np.uint8)
    shifts = np.arange(m - 1, -1, -1, dtype=np.uint8)
    return ((d[:, None] >> shifts) & 1).astype(np.uint8).ravel()


class OrbitStream:
    """The first ``horizon`` points of an orbit, generated lazily as limbs."""

    def __init__(self, system: SystemSpec, seed, horizon: int):
        if horizon < 0:
            raise ValueError("horizon must be >= 0")
        self.system = system
        self.seed = seed
        self.horizon = horizon
        self._limbs = None
        self._floats = None
        kind = system.kind
        if kind is SystemKind.KARY:
            if not isinstance(seed, BitStreamPoint) or seed.base != system.k:
                raise TypeError("k-ary orbit needs a BitStreamPoint seed in base k")
            if horizon and seed.available < horizon - 1:
                raise InsufficientDigits(
                    f"{horizon} iterates need {horizon - 1 + BITS} digits after the cursor")
        elif kind is SystemKind.ROTATION:
            if not isinstance(seed, CirclePoint):
                raise TypeError("rotation orbit needs a CirclePoint seed")

    @property
    def exactness(self) -> Exactness:
        return self.system.exactness

    def floats(self) -> np.ndarray:
        """Float64 orbit (the iterated values themselves for shadow systems)."""
        if self._floats is None:
            kind = self.system.kind
            n = self.horizon
            if kind is SystemKind.LOGISTIC4:
                out = np.empty(n)
                K.logistic_orbit(float(self.seed), n, out)
            elif kind is SystemKind.GAUSS:
                out = np.empty(n)
                stop = K.gauss_orbit(float(self.seed), n, out)
                if stop < n:
                    raise DomainError(f"Gauss orbit reached 0 at step {stop}")
            else:
                hi, lo = self.limbs()
                out = np.ldexp(hi.astype(np.float64), -64) + np.ldexp(lo.astype(np.float64), -128)
            self._floats = out
        return self._floats

    def limbs(self) -> tuple[np.ndarray, np.ndarray]:
        if self._limbs is None:
            self._limbs = self._make_limbs()
        return self._limbs

    def _make_limbs(self):
        n = self.horizon
        kind = self.system.kind
        hi = np.empty(n, np.uint64)
        lo = np.empty(n, np.uint64)
        if n == 0:
            return hi, lo
        if kind is SystemKind.KARY:
            k = self.system.k
            digits = self.seed.digits[self.seed.cursor:self.seed.cursor + n - 1 + BITS]
            m = k.bit_length() - 1
            if k == 1 << m:
                bits = _bits_from_digits(digits, m) if m > 1 else digits.astype(np.uint8)
                K.bit_window_orbit(np.ascontiguousarray(bits), m, n, hi, lo)
            else:
                mod = k ** BITS
                v = 0
                for dgt in digits[:BITS].tolist():
                    v = v * k + dgt
                tail = digits[BITS:].tolist()
                for i in range(n):
                    f = v * ONE // mod
                    hi[i] = f >> 64
                    lo[i] = f & _M64
                    if i < n - 1:
                        v = (v * k) % mod + tail[i]
        elif kind is SystemKind.ROTATION:
            s, a = self.seed.frac, self.system.alpha.frac
            K.rotation_orbit(np.uint64(s >> 64), np.uint64(s & _M64),
                             np.uint64(a >> 64), np.uint64(a & _M64), n, hi, lo)
        else:
            hi, lo = _float_to_limbs(self.floats())
        return hi, lo

    def point(self, i: int) -> CirclePoint:
        """The i-th iterate.  Rotation is evaluated as seed + i*alpha directly."""
        if not 0 <= i < self.horizon:
            raise IndexError(i)
        if self.system.kind is SystemKind.ROTATION:
            return CirclePoint((self.seed.frac + i * self.system.alpha.frac) & MASK)
        if self.system.kind is SystemKind.KARY and self._limbs is None:
            return self.seed.materialize(i)
        hi, lo = self.limbs()
        return CirclePoint.from_limbs(hi[i], lo[i])

    def fracs(self) -> list[int]:
        hi, lo = self.limbs()
        return [(a << 64) | b for a, b in zip(hi.tolist(), lo.tolist())]


def random_orbit(system: SystemSpec, rng: np.random.Generator, horizon: int,
                 max_resample: int = 100) -> tuple[OrbitStream, int]:
    """A random orbit started from the system's invariant measure.

    Returns the stream and the number of resampled seeds (Gauss orbits that hit
    0 before the horizon).
    """
    kind = system.kind
    if kind is SystemKind.KARY:
        seed = BitStreamPoint.random(rng, max(horizon, 1) - 1 + BITS, system.k)
        return OrbitStream(system, seed, horizon), 0
    if kind is SystemKind.ROTATION:
        w = rng.integers(0, 1 << 64, size=2, dtype=np.uint64)
        seed = CirclePoint((int(w[0]) << 64) | int(w[1]))
        return OrbitStream(system, seed, horizon), 0
    resampled = 0
    for _ in range(max_resample):
        x0 = sample_seed(system.measure, rng)
        stream = OrbitStream(system, x0, horizon)
        try:
            stream.floats()
            return stream, resampled
        except DomainError:
            resampled += 1
    raise DomainError("could not draw a Gauss seed with a full orbit")
