"""Minimal orbit distances M_n, first hits against a schedule, and pair counters.

Every distance is an exact integer in units of 2^-128.  A hit at time n means
M_n < r_n (ties count as misses).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .circlepoint import HALF, MASK, ONE, threshold_frac
from .dynamics import OrbitStream
from .errors import PreconditionError
from .oracles import build_cover, cover_hits

_M64 = (1 << 64) - 1
_U64MAX = np.uint64(_M64)


class Mode(enum.Enum):
    TWO_ORBITS = "two-orbits"
    SINGLE_ORBIT = "single-orbit"


def dyadic_checkpoints(N: int) -> list:
    out, n = [], 1
    while n <= N:
        out.append(n)
        n *= 2
    if out and out[-1] != N:
        out.append(N)
    return out


@dataclass
class MinTrace:
    """M_n for n = 1..N as 128-bit limbs (index n-1)."""
    hi: np.ndarray
    lo: np.ndarray
    mode: Mode
    circle: bool

    def __len__(self):
        return int(self.hi.size)

    @property
    def defined(self) -> np.ndarray:
        """False where no pair exists yet (single orbit, n = 1)."""
        d = np.ones(len(self), dtype=bool)
        if self.mode is Mode.SINGLE_ORBIT and len(self):
            d[0] = False
        return d

    def frac(self, n: int):
        """Exact M_n in 2^-128 units, or None when there is no pair."""
        if self.mode is Mode.SINGLE_ORBIT and n < 2:
            return None
        return (int(self.hi[n - 1]) << 64) | int(self.lo[n - 1])

    def floats(self) -> np.ndarray:
        v = np.ldexp(self.hi.astype(np.float64), -64) + np.ldexp(self.lo.astype(np.float64), -128)
        v[~self.defined] = np.inf
        return v

    def hits(self, thresholds: tuple) -> np.ndarray:
        """Boolean array over n = 1..N of M_n < r_n, given threshold limbs."""
        thi, tlo, valid = thresholds
        n = len(self)
        thi, tlo, valid = thi[:n], tlo[:n], valid[:n]
        h = (self.hi < thi) | ((self.hi == thi) & (self.lo <= tlo))
        return h & valid & self.defined


def thresholds(schedule, N: int, scale: float = 1.0):
    """Threshold limbs T_n with M_n < scale * r_n  <=>  M_n <= T_n (n = 1..N)."""
    return _thresholds(schedule, N, float(scale))


@lru_cache(maxsize=64)
def _thresholds(schedule, N, scale):
    r = schedule.eval_array(np.arange(1, N + 1)) * scale
    thi = np.zeros(N, np.uint64)
    tlo = np.zeros(N, np.uint64)
    valid = np.ones(N, dtype=bool)
    for i, rv in enumerate(r.tolist()):
        t = threshold_frac(rv)
        if t < 0:
            valid[i] = False
            continue
        thi[i] = t >> 64
        tlo[i] = t & _M64
    for a in (thi, tlo, valid):
        a.setflags(write=False)
    return thi, tlo, valid


def _ranked(hi: np.ndarray, lo: np.ndarray):
    order = np.lexsort((lo, hi))
    ranks = np.empty(hi.size, np.int64)
    ranks[order] = np.arange(hi.size, dtype=np.int64)
    return ranks, np.ascontiguousarray(hi[order]), np.ascontiguousarray(lo[order])


def min_distance_trace(orbit1: OrbitStream, orbit2: OrbitStream | None, N: int) -> MinTrace:
    """Incremental M_n for n = 1..N.

    Ranks of all points are fixed up front; each orbit's inserted set is a
    bitset over ranks, so nearest-neighbour queries are predecessor/successor
    lookups (wrapping for the circle metric).
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    circle = orbit1.system.circle
    if orbit2 is not None and orbit2.system.circle != circle:
        raise PreconditionError("both orbits must use the same metric")
    if orbit1.horizon < N or (orbit2 is not None and orbit2.horizon < N):
        raise PreconditionError("orbit horizon shorter than N")
    out_hi = np.empty(N, np.uint64)
    out_lo = np.empty(N, np.uint64)
    if N == 0:
        mode = Mode.TWO_ORBITS if orbit2 is not None else Mode.SINGLE_ORBIT
        return MinTrace(out_hi, out_lo, mode, circle)
    xh, xl = orbit1.limbs()
    if orbit2 is None:
        ranks, sh, sl = _ranked(xh[:N], xl[:N])
        words, summ = K.new_bitset(N)
        K.single_orbit_trace(ranks, sh, sl, circle, words, summ, out_hi, out_lo)
        return MinTrace(out_hi, out_lo, Mode.SINGLE_ORBIT, circle)
    yh, yl = orbit2.limbs()
    ranks, sh, sl = _ranked(np.concatenate((xh[:N], yh[:N])), np.concatenate((xl[:N], yl[:N])))
    wx, sx = K.new_bitset(2 * N)
    wy, sy = K.new_bitset(2 * N)
    K.two_orbit_trace(ranks[:N], ranks[N:], sh, sl, circle, wx, sx, wy, sy, out_hi, out_lo)
    return MinTrace(out_hi, out_lo, Mode.TWO_ORBITS, circle)


@dataclass
class ClosenessProfile:
    mode: Mode
    N: int
    checkpoints: list
    m_fracs: list                 # exact M_n (2^-128 units) at checkpoints, None = no pair
    first_hit: int | None
    trace: MinTrace = field(repr=False, default=None)
    schedule_name: str = ""
    radius_scale: float = 1.0
    schedule: object = field(repr=False, default=None)

    @property
    def m_values(self) -> list:
        return [float("inf") if m is None else m / ONE for m in self.m_fracs]

    def hit_flags(self, schedule=None, scale=None) -> np.ndarray:
        schedule = schedule if schedule is not None else self.schedule
        if schedule is None:
            raise ValueError("profile has no schedule")
        return self.trace.hits(thresholds(schedule, self.N, self.radius_scale if scale is None else scale))


def _profile(trace: MinTrace, N: int, schedule, checkpoints, scale: float) -> ClosenessProfile:
    cps = list(checkpoints) if checkpoints is not None else dyadic_checkpoints(N)
    fracs = [trace.frac(n) for n in cps]
    first = None
    if schedule is not None and N:
        h = trace.hits(thresholds(schedule, N, scale))
        idx = np.flatnonzero(h)
        first = int(idx[0]) + 1 if idx.size else None
    return ClosenessProfile(trace.mode, N, cps, fracs, first, trace,
                            getattr(schedule, "name", ""), scale, schedule)


def closeness_profile(orbit1: OrbitStream, orbit2: OrbitStream, N: int, schedule=None,
                      checkpoints=None, scale: float = 1.0) -> ClosenessProfile:
    """Two-orbit profile: M_n = min over 0 <= i, j < n of d(x_i, y_j)."""
    return _profile(min_distance_trace(orbit1, orbit2, N), N, schedule, checkpoints, scale)


def single_orbit_profile(orbit: OrbitStream, N: int, schedule=None, checkpoints=None,
                         scale: float = 1.0) -> ClosenessProfile:
    """Single-orbit profile: M_n = min over 0 <= i < j < n of d(x_i, x_j)."""
    if N < 2:
        checkpoints = []
    return _profile(min_distance_trace(orbit, None, N), N, schedule, checkpoints, scale)


def profile_rows(profile: ClosenessProfile, trial_id: int = 0, schedule=None):
    """CSV rows (trial_id, n, M_n, r_n, hit_flag) at the checkpoints."""
    hits = profile.hit_flags(schedule) if schedule is not None else None
    for n, m in zip(profile.checkpoints, profile.m_fracs):
        mv = "inf" if m is None else format(m / ONE, ".17g")
        if schedule is not None:
            rv = format(schedule.eval(n) * profile.radius_scale, ".17g")
            hf = int(bool(hits[n - 1]))
        else:
            rv, hf = "", ""
        yield trial_id, n, mv, rv, hf


# ------------------------------------------------------------------- counters

class CounterKind(enum.Enum):
    S = "S"
    S_HAT = "S_hat"
    Q = "Q"
    Q_HAT = "Q_hat"


@dataclass
class CounterStatistics:
    kind: CounterKind
    checkpoints: list
    values: list
    gamma: float | None = None
    radii: list = field(default_factory=list)


def _sorted_limbs(hi, lo):
    order = np.lexsort((lo, hi))
    return np.ascontiguousarray(hi[order]), np.ascontiguousarray(lo[order])


def _count_pairs(qh, ql, sh, sl, T: int, circle: bool) -> int:
    """#{(q, s) : d(q, s) <= T} with s from a sorted array."""
    if T < 0:
        return 0
    if (circle and T >= HALF) or T >= MASK:
        return int(qh.size) * int(sh.size)
    out = np.empty(qh.size, np.int64)
    K.count_within(sh, sl, qh, ql, np.uint64(T >> 64), np.uint64(T & _M64), circle, out)
    return int(out.sum())


def count_s(orbit1: OrbitStream, orbit2: OrbitStream, n: int, r: float) -> int:
    """S_n: pairs (i, j) in [0, n)^2 with d(x_i, y_j) < r."""
    xh, xl = orbit1.limbs()
    yh, yl = orbit2.limbs()
    sh, sl = _sorted_limbs(yh[:n], yl[:n])
    return _count_pairs(xh[:n], xl[:n], sh, sl, threshold_frac(r), orbit1.system.circle)


def count_s_hat(orbit1: OrbitStream, orbit2: OrbitStream, k: int, r: float) -> int:
    """Dyadic-block counter: pairs with 2^k <= max(i, j) < 2^(k+1)."""
    n1 = 1 << (k + 1)
    n0 = 1 << k
    return count_s(orbit1, orbit2, n1, r) - count_s(orbit1, orbit2, n0, r)


def count_q(orbit: OrbitStream, n: int, r: float) -> int:
    """Q_n: pairs i < j < n on one orbit with d(x_i, x_j) < r."""
    xh, xl = orbit.limbs()
    sh, sl = _sorted_limbs(xh[:n], xl[:n])
    total = _count_pairs(xh[:n], xl[:n], sh, sl, threshold_frac(r), orbit.system.circle)
    return (total - n) // 2


def count_q_hat(orbit: OrbitStream, n: int, r_bar: float, gamma: float, cover=None) -> int:
    """Windowed cover counter.

    Sums over i in [0, gamma 2^n), j in [(1 - gamma) 2^n, 2^n) and over the
    cover balls B(x_p, 2 r_bar) containing both x_i and x_j.
    """
    if not 0 < gamma < 0.5:
        raise PreconditionError("gamma must lie in (0, 1/2)")
    cover = cover if cover is not None else build_cover(r_bar)
    size = 1 << n
    left_end = int(np.ceil(gamma * size))
    right_start = int(np.ceil((1 - gamma) * size))
    fr = orbit.fracs() if orbit.horizon >= size else None
    if fr is None:
        raise PreconditionError("orbit horizon shorter than 2^n")
    left = {}
    for f in fr[:left_end]:
        for p in cover_hits(cover, f):
            left[p] = left.get(p, 0) + 1
    total = 0
    for f in fr[right_start:size]:
        for p in cover_hits(cover, f):
            total += left.get(p, 0)
    return total


def counters(orbit1: OrbitStream, orbit2: OrbitStream | None, N: int, schedule,
             kind, gamma: float | None = None, checkpoints=None) -> CounterStatistics:
    """Counter values at checkpoints; the radius is re-evaluated at each checkpoint."""
    kind = CounterKind(kind) if isinstance(kind, str) else kind
    if kind in (CounterKind.S, CounterKind.S_HAT) and orbit2 is None:
        raise PreconditionError("S counters need two orbits")
    if kind is CounterKind.Q_HAT:
        if gamma is None or not 0 < gamma < 0.5:
            raise PreconditionError("gamma must lie in (0, 1/2)")
    values, radii = [], []
    if kind in (CounterKind.S_HAT, CounterKind.Q_HAT):
        ks = checkpoints if checkpoints is not None else list(range(0, max(N.bit_length() - 1, 0)))
        for k in ks:
            if kind is CounterKind.S_HAT:
                r = schedule.eval(1 << (k + 1))
                values.append(count_s_hat(orbit1, orbit2, k, r))
            else:
                r = schedule.eval(1 << (k + 1))
                values.append(count_q_hat(orbit1, k, r, gamma))
            radii.append(r)
        return CounterStatistics(kind, list(ks), values, gamma, radii)
    cps = checkpoints if checkpoints is not None else dyadic_checkpoints(N)
    for n in cps:
        r = schedule.eval(n)
        radii.append(r)
        values.append(count_s(orbit1, orbit2, n, r) if kind is CounterKind.S else count_q(orbit1, n, r))
    return CounterStatistics(kind, list(cps), values, gamma, radii)
