"""Independent reference computations.

Everything here avoids the engine's data structures so it can be used to
check them: closed forms, exact rational arithmetic, brute force and grid
quadrature.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circlepoint import MASK, ONE, CirclePoint, circle_distance_frac, threshold_frac
from .dynamics import GOLDEN_FRAC, SQRT2M1_FRAC
from .errors import PrecisionExhausted

_M64 = (1 << 64) - 1


# ------------------------------------------------------------ Fourier machinery

@dataclass(frozen=True)
class FourierIndicator:
    """Fourier coefficients of the periodic indicator of B(0, r)."""
    r: float

    @property
    def radius(self) -> float:
        return min(self.r, 0.5)

    def coef(self, k):
        k = np.asarray(k, dtype=float)
        r = self.radius
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.sin(2 * np.pi * k * r) / (np.pi * k)
        c = np.where(k == 0, 2 * r, c)
        return c if c.ndim else float(c)

    def coef_at_phase(self, k, t):
        """c_k computed as sin(2 pi frac(k t)) / (pi k) for frequencies k = m 2^p.

        ``t`` is frac(2^p r); reducing the phase first keeps large frequencies
        accurate.
        """
        k = np.asarray(k, dtype=float)
        ph = np.mod(k * t, 1.0)
        return np.sin(2 * np.pi * ph) / (np.pi * k)


@dataclass
class CovarianceValue:
    value: float
    tail_bound: float
    kmax: int
    gap: int | None

    def __float__(self):
        return self.value


def _frac_pow2(r: float, p: int) -> float:
    """frac(2^p r), exact in binary-64."""
    if p >= 1100:
        return 0.0
    return math.fmod(math.ldexp(r, p), 1.0) if p < 1000 else 0.0


def split_index(r1: float, r2: float, p: int) -> float:
    return (4 * r1 * r2) ** -0.5 * 2.0 ** (-p / 2)


def _b2(t):
    t = np.mod(t, 1.0)
    return t * t - t + 1.0 / 6.0


def pair_covariance_doubling(i1: int, j1: int, i2: int, j2: int, r1: float, r2: float,
                             kmax: int | None = None, method: str = "series") -> CovarianceValue:
    """Covariance of the events ||2^i1 x - 2^j1 y|| < r1 and ||2^i2 x - 2^j2 y|| < r2
    under Lebesgue measure on the torus.

    Zero whenever the two index gaps differ.  Otherwise it is the sum over
    k != 0 of c_{r1}(-k 2^p) c_{r2}(k), p = j2 - j1 (after ordering j1 <= j2).
    ``method="series"`` truncates at kmax and reports the tail bound;
    ``method="closed"`` uses the Bernoulli-polynomial identity
    sum_{k>=1} cos(2 pi k t)/k^2 = pi^2 B2(frac t).
    """
    if j2 < j1:
        i1, j1, r1, i2, j2, r2 = i2, j2, r2, i1, j1, r1
    p = j2 - j1
    if i2 - i1 != p:
        return CovarianceValue(0.0, 0.0, 0, None)
    r1, r2 = min(r1, 0.5), min(r2, 0.5)
    if r1 == 0.5 or r2 == 0.5:
        return CovarianceValue(0.0, 0.0, 0, p)
    t1 = _frac_pow2(r1, p)
    scale = math.ldexp(1.0, -p)
    if method == "closed":
        v = scale * float(_b2(t1 - r2) - _b2(t1 + r2))
        return CovarianceValue(v, 0.0, -1, p)
    if kmax is None:
        kmax = int(max(1 << 20, math.ceil(4 * split_index(r1, r2, p))))
    total = 0.0
    chunk = 1 << 20
    for a in range(1, kmax + 1, chunk):
        k = np.arange(a, min(a + chunk, kmax + 1), dtype=float)
        # c_{r1}(k 2^p) = sin(2 pi k t1) / (pi k 2^p), c_{r2}(k) = sin(2 pi k r2)/(pi k)
        c1 = np.sin(2 * np.pi * np.mod(k * t1, 1.0)) / (np.pi * k) * scale
        c2 = np.sin(2 * np.pi * np.mod(k * r2, 1.0)) / (np.pi * k)
        total += float(np.sum(c1 * c2))
    tail = 2.0 / (kmax * math.ldexp(1.0, p) * math.pi ** 2)
    return CovarianceValue(2.0 * total, tail, kmax, p)


def _periodic_count_lt(v_sorted, t):
    fl = np.floor(t)
    return fl * v_sorted.size + np.searchsorted(v_sorted, t - fl, "left")


def _periodic_count_le(v_sorted, t):
    fl = np.floor(t)
    return fl * v_sorted.size + np.searchsorted(v_sorted, t - fl, "right")


def covariance_grid_oracle(i1: int, j1: int, i2: int, j2: int, r1: float, r2: float,
                           bits: int = 14) -> float:
    """Midpoint-rule value of the same covariance on a 2^bits x 2^bits grid.

    For each grid x the admissible grid y are counted by sorted search: with
    v = frac(2^j1 y) the second condition reads frac(2^p v) near frac(2^i2 x),
    a union of short arcs intersected with the arc around frac(2^i1 x).
    """
    if j2 < j1:
        i1, j1, r1, i2, j2, r2 = i2, j2, r2, i1, j1, r1
    if r1 >= 0.5 or r2 >= 0.5:
        return 0.0
    p = j2 - j1
    n = 1 << bits
    h = 1.0 / n
    g = (np.arange(n) + 0.5) * h
    v = np.sort(np.mod(np.ldexp(g, j1), 1.0))
    a1 = np.mod(np.ldexp(g, i1), 1.0)
    a2 = np.mod(np.ldexp(g, i2), 1.0)
    P = float(1 << p)
    # arcs of the second condition in unwrapped v-coordinates: (m + a2 -+ r2) / 2^p
    lo1 = a1 - r1
    hi1 = a1 + r1
    m0 = np.floor(P * lo1 - a2 - r2)
    J = int(math.ceil(P * 2 * r1 + 2 * r2)) + 2
    count = np.zeros(n)
    for j in range(J + 1):
        m = m0 + j
        lo = np.maximum((m + a2 - r2) / P, lo1)
        hi = np.minimum((m + a2 + r2) / P, hi1)
        ok = hi > lo
        c = _periodic_count_lt(v, hi) - _periodic_count_le(v, lo)
        count += np.where(ok, c, 0.0)
    joint = float(count.sum()) / (n * n)
    return joint - (2 * r1) * (2 * r2)


def harman_numerator_terms(j1, j2, r1, r2) -> np.ndarray:
    """Vectorised closed-form covariance cov(p = j2 - j1; r_{j1}, r_{j2})."""
    p = np.asarray(j2) - np.asarray(j1)
    r1 = np.minimum(r1, 0.5)
    r2 = np.minimum(r2, 0.5)
    t1 = np.where(p < 1000, np.mod(np.ldexp(r1, np.minimum(p, 1000)), 1.0), 0.0)
    v = np.ldexp(_b2(t1 - r2) - _b2(t1 + r2), -p)
    return np.where((r1 >= 0.5) | (r2 >= 0.5), 0.0, v)


# ---------------------------------------------------------------- mixing lines

def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def lag_covariance_doubling(psi, phi, lag: int) -> Fraction:
    """Exact Cov(1_psi, 1_phi o T^lag) for the doubling map, psi/phi = [a, b) intervals."""
    a, b = map(_as_fraction, psi)
    c, d = map(_as_fraction, phi)
    s = 1 << lag

    def F(t):
        # measure of {x in [0, t): frac(2^lag x) in [c, d)}
        whole = math.floor(t * s)
        rem = t * s - whole
        part = min(max(rem - c, 0), d - c)
        return (whole * (d - c) + part) / s

    return F(b) - F(a) - (b - a) * (d - c)


def lag_covariance_fourier(psi, phi, lag: int, kmax: int = 1 << 16) -> float:
    """The same covariance from the Fourier series, truncated at |k| <= kmax."""
    a, b = map(float, psi)
    c, d = map(float, phi)
    k = np.arange(1, kmax + 1, dtype=float)

    def hat(m, lo, hi):
        return (np.exp(-2j * np.pi * m * lo) - np.exp(-2j * np.pi * m * hi)) / (2j * np.pi * m)

    m = -k * 2.0 ** lag
    s = hat(k, c, d) * hat(m, a, b)
    return float(2 * np.real(np.sum(s)))


# ---------------------------------------------------------------- short returns

def short_return_measure_doubling(r: float, n: int) -> float:
    """Lebesgue measure of {x : ||2^n x - x|| < r}: multiplication by 2^n - 1
    preserves Lebesgue measure, so this is exactly min(2r, 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if r <= 0:
        raise ValueError("r must be positive")
    return min(2.0 * r, 1.0)


def short_return_monte_carlo(r: float, n: int, samples: int, rng: np.random.Generator):
    """Fraction of 64-bit uniform x with ||(2^n - 1) x|| < r, and its binomial sigma."""
    x = rng.integers(0, 1 << 64, size=samples, dtype=np.uint64)
    mult = np.uint64(((1 << n) - 1) & _M64)
    v = x * mult                       # wraps mod 2^64
    d = np.minimum(v, (~v) + np.uint64(1))
    thr = math.ceil(min(r, 0.5) * 2.0 ** 64)
    hit = d.astype(np.float64) < thr if thr >= 2 ** 63 else d < np.uint64(thr)
    p = float(np.mean(hit))
    target = min(2 * r, 1.0)
    return p, math.sqrt(target * (1 - target) / samples)


# ------------------------------------------------------------- rotation closed forms

def _norm(v: int) -> int:
    v &= MASK
    return min(v, ONE - v)


def rotation_min_trace(delta: CirclePoint, alpha: CirclePoint, N: int, single: bool = False) -> list:
    """M_n for n = 1..N: min over |k| <= n-1 of ||delta + k alpha|| (two orbits),
    or min over 1 <= k <= n-1 of ||k alpha|| (single orbit, None at n = 1)."""
    a = alpha.frac
    out = []
    if single:
        best = None
        for n in range(1, N + 1):
            if n >= 2:
                v = _norm((n - 1) * a)
                best = v if best is None else min(best, v)
            out.append(best)
        return out
    d = delta.frac
    best = _norm(d)
    for n in range(1, N + 1):
        k = n - 1
        if k:
            best = min(best, _norm(d + k * a), _norm(d - k * a))
        out.append(best)
    return out


def rotation_min_distance(delta: CirclePoint, alpha: CirclePoint, n: int, single: bool = False):
    """Exact M_n (in 2^-128 units) for two rotation orbits with the same angle."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return rotation_min_trace(delta, alpha, n, single)[-1]


# ------------------------------------------------------------- continued fractions

SYMBOLIC = {
    "golden": lambda k: 1,
    "sqrt2-1": lambda k: 2,
}


def _euclid(num: int, den: int, limit: int | None = None) -> list:
    out = []
    while den and (limit is None or len(out) < limit):
        a, rem = divmod(num, den)
        out.append(a)
        num, den = den, rem
    return out


def _convergents(quotients):
    p0, q0, p1, q1 = 1, 0, quotients[0], 1
    yield p1, q1
    for a in quotients[1:]:
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield p1, q1


@dataclass
class DiophantineProfile:
    alpha: CirclePoint | None
    partial_quotients: list
    convergents: list
    records: list = field(default_factory=list)   # (q, q * ||q alpha||)
    symbolic: str | None = None
    valid_depth: int = 0
    exact: bool = False

    def to_json(self) -> dict:
        return {
            "alpha_hex": self.alpha.hex() if self.alpha is not None else None,
            "symbolic": self.symbolic,
            "partial_quotients": [str(a) for a in self.partial_quotients],
            "convergents": [[str(p), str(q)] for p, q in self.convergents],
            "records": [[str(q), v] for q, v in self.records],
            "valid_depth": self.valid_depth,
            "exact": self.exact,
        }


def _value_fraction(profile_quotients) -> Fraction:
    p, q = list(_convergents(profile_quotients))[-1]
    return Fraction(p, q)


def continued_fraction(alpha, depth: int | None = None, exact: bool = False,
                       qmax: int | None = None) -> DiophantineProfile:
    """Partial quotients and convergents of alpha in (0, 1).

    ``alpha`` is a CirclePoint, a tag (``"golden"``, ``"sqrt2-1"``) or a
    callable k -> a_k (k >= 1) for a symbolic expansion [0; a_1, a_2, ...].
    A CirclePoint is read as an unknown real in [a, a + 1) / 2^128: quotients
    are valid only as far as both ends agree, and asking for more raises
    PrecisionExhausted.  ``exact=True`` treats a/2^128 as the exact rational.
    """
    if isinstance(alpha, str) or callable(alpha):
        fn = SYMBOLIC[alpha] if isinstance(alpha, str) else alpha
        tag = alpha if isinstance(alpha, str) else "symbolic"
        quotients = [0]
        k = 1
        target = depth if depth is not None else None
        while True:
            if target is not None and len(quotients) > target:
                break
            quotients.append(int(fn(k)))
            k += 1
            if target is None:
                q = list(_convergents(quotients))[-1][1]
                # go deep enough that ||q alpha|| at q <= qmax is resolved exactly
                if q > (qmax or 10 ** 6) ** 2 * (1 << 64):
                    break
        convs = list(_convergents(quotients))
        base = {"golden": GOLDEN_FRAC, "sqrt2-1": SQRT2M1_FRAC}.get(tag)
        return _with_records(DiophantineProfile(
            CirclePoint(base) if base is not None else None, quotients, convs, symbolic=tag,
            valid_depth=len(quotients)), qmax)
    if not isinstance(alpha, CirclePoint):
        alpha = CirclePoint.from_float(float(alpha))
    a = alpha.frac
    if exact:
        qs = _euclid(a, ONE)
        valid = len(qs)
    else:
        lo = _euclid(a, ONE)
        hi = _euclid(a + 1, ONE)
        valid = 0
        # the last agreeing quotient may still be truncated; keep the strict prefix
        while valid < min(len(lo), len(hi)) and lo[valid] == hi[valid]:
            valid += 1
        valid = max(valid - 1, 1)
        qs = lo[:valid]
    if depth is not None:
        if depth + 1 > len(qs) and not exact:
            raise PrecisionExhausted(
                f"only {len(qs) - 1} partial quotients are determined by 128 bits")
        qs = qs[:depth + 1]
    convs = list(_convergents(qs))
    return _with_records(DiophantineProfile(alpha, qs, convs, valid_depth=valid, exact=exact), qmax)


def _with_records(prof: DiophantineProfile, qmax) -> DiophantineProfile:
    # exact ||q alpha|| against the best available rational model of alpha
    if prof.symbolic is not None:
        model = _value_fraction(prof.partial_quotients)
    else:
        model = Fraction(prof.alpha.frac, ONE)
    recs = []
    for p, q in prof.convergents:
        if q == 0 or (qmax is not None and q > qmax):
            continue
        x = q * model
        dist = abs(x - round(x))
        recs.append((q, float(q * dist)))
    prof.records = recs
    return prof


class FormKind(enum.Enum):
    LOG_SQUARED = "thm6-3"      # q^2 ||q alpha|| >= (log q)^2 (loglog q)^(1+eps)
    LOG_PHI = "thm6-4"          # q^2 ||q alpha|| >= log q * phi(q)
    EXPONENT = "exponent"


@dataclass(frozen=True)
class DiophantineForm:
    kind: FormKind
    eps: float = 0.1
    sigma: float = 0.0
    phi: object = None      # callable q -> phi(q) for LOG_PHI

    def weight(self, q: int) -> float:
        L = math.log(q)
        if self.kind is FormKind.LOG_SQUARED:
            return L ** 2 * math.log(L) ** (1 + self.eps)
        if self.kind is FormKind.LOG_PHI:
            phi = self.phi if self.phi is not None else (lambda v: math.log(math.log(v)))
            return L * phi(q)
        return float(q) ** (1 - self.sigma)


@dataclass
class DiophantineReport:
    form: str
    qmax: int
    min_margin: float
    argmin_q: int
    tail_liminf: float
    trace: list       # (q, margin) over convergents 3 <= q <= qmax
    verdict: str = "Undetermined"

    def to_json(self) -> dict:
        return {"form": self.form, "qmax": self.qmax, "min_margin": self.min_margin,
                "argmin_q": str(self.argmin_q), "tail_liminf": self.tail_liminf,
                "verdict": self.verdict,
                "trace": [[str(q), m] for q, m in self.trace]}


def diophantine_condition(profile: DiophantineProfile, form: DiophantineForm,
                          qmax: int) -> DiophantineReport:
    """Margins q^2 ||q alpha|| / weight(q) over convergent denominators.

    Best approximations are exactly the convergents, so checking them is
    enough.  ``tail_liminf`` is the minimum over the tail q >= sqrt(qmax), a
    finite-range stand-in for the liminf.
    """
    if profile.symbolic is None and not profile.exact and profile.convergents[-1][1] < qmax:
        raise PrecisionExhausted("expansion is not validated up to qmax")
    model = (_value_fraction(profile.partial_quotients) if profile.symbolic is not None
             else Fraction(profile.alpha.frac, ONE))
    trace = []
    for p, q in profile.convergents:
        if q < 3 or q > qmax:
            continue
        x = q * model
        dist = abs(x - round(x))
        trace.append((q, float(q * q * dist) / form.weight(q)))
    if not trace:
        raise PrecisionExhausted("no convergent denominators in [3, qmax]")
    qmin, mmin = min(trace, key=lambda t: t[1])
    tail = [m for q, m in trace if q * q >= qmax] or [trace[-1][1]]
    return DiophantineReport(form.kind.value, qmax, mmin, qmin, min(tail), trace)


def unique_return_check(alpha: CirclePoint, n: int, r: float):
    """(ok, j): ok iff min over 1 <= j <= n of ||j alpha|| >= 2r; j attains the min."""
    best, arg = None, None
    for j in range(1, n + 1):
        v = _norm(j * alpha.frac)
        if best is None or v < best:
            best, arg = v, j
    if best is None:
        return True, None
    return best > threshold_frac(2 * r), arg


# ------------------------------------------------------------------ covering

@dataclass(frozen=True)
class CircleCover:
    r: float
    k: int
    overlap_bound: int = 5

    def center(self, p: int) -> int:
        return p * ONE // self.k

    @property
    def threshold(self) -> int:
        """Distances <= this are inside a 2r-ball."""
        return threshold_frac(2 * self.r)


def build_cover(r: float) -> CircleCover:
    """k = ceil(1/r) centres p/k, spacing 1/k <= r; balls of radius 2r."""
    if not 0 < r <= 0.125:
        raise ValueError("r must lie in (0, 1/8]")
    return CircleCover(r, math.ceil(1.0 / r))


def cover_hits(cover: CircleCover, x) -> list:
    """Indices p with d(x, x_p) < 2r."""
    f = x.frac if isinstance(x, CirclePoint) else int(x)
    p0 = f * cover.k // ONE
    T = cover.threshold
    out = []
    for p in range(p0 - 3, p0 + 4):
        q = p % cover.k
        if q not in out and circle_distance_frac(f, cover.center(q)) <= T:
            out.append(q)
    return out


def sandwich_terms(cover: CircleCover, x, y) -> tuple:
    """(1_{B(x,r)}(y), sum_p 1_p(x) 1_p(y), C0 * 1_{B(x,4r)}(y))."""
    d = circle_distance_frac(x, y)
    lhs = int(d <= threshold_frac(cover.r))
    mid = len(set(cover_hits(cover, x)) & set(cover_hits(cover, y)))
    rhs = cover.overlap_bound * int(d <= threshold_frac(4 * cover.r))
    return lhs, mid, rhs


def indicator_sandwich_check(cover: CircleCover, x, y) -> bool:
    lhs, mid, rhs = sandwich_terms(cover, x, y)
    return lhs <= mid <= rhs


# ------------------------------------------------------------ brute force M_n

def _dist_matrix(ah, al, bh, bl, circle):
    """Pairwise 128-bit distances as (hi, lo) uint64 matrices."""
    lo = al[:, None] - bl[None, :]
    borrow = (al[:, None] < bl[None, :]).astype(np.uint64)
    hi = ah[:, None] - bh[None, :] - borrow
    if circle:
        neg = hi >> np.uint64(63) == 1
    else:
        neg = (ah[:, None] < bh[None, :]) | ((ah[:, None] == bh[None, :]) & (al[:, None] < bl[None, :]))
    nlo = ~lo + np.uint64(1)
    nhi = ~hi + (lo == 0).astype(np.uint64)
    return np.where(neg, nhi, hi), np.where(neg, nlo, lo)


def _lex_min(h, l):
    m = h.min()
    return (int(m) << 64) | int(l[h == m].min())


def brute_force_profile(x_fracs, y_fracs=None, circle: bool = True) -> list:
    """O(N^2) M_n for n = 1..N (None where no pair exists)."""
    def split(fr):
        return (np.array([f >> 64 for f in fr], np.uint64),
                np.array([f & _M64 for f in fr], np.uint64))

    xh, xl = split(x_fracs)
    N = len(x_fracs)
    single = y_fracs is None
    yh, yl = (xh, xl) if single else split(y_fracs)
    H, L = _dist_matrix(xh, xl, yh, yl, circle)
    out, best = [], None
    for b in range(N):
        if single:
            cand = (H[:b, b], L[:b, b])
        else:
            cand = (np.concatenate((H[b, :b + 1], H[:b, b])), np.concatenate((L[b, :b + 1], L[:b, b])))
        if cand[0].size:
            v = _lex_min(*cand)
            best = v if best is None else min(best, v)
        out.append(best)
    return out


def brute_force_pairs(x_fracs, y_fracs, r: float, circle: bool = True) -> int:
    """#{(i, j): d(x_i, y_j) < r} by direct enumeration."""
    T = threshold_frac(r)
    dist = circle_distance_frac if circle else (lambda a, b: abs(a - b))
    return sum(1 for a in x_fracs for b in y_fracs if dist(a, b) <= T)
