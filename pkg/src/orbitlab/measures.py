"""Ball masses, correlation integrals and correlation-dimension fits."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .dynamics import LEBESGUE, MeasureKind, MeasureSpec, Metric
from .errors import DegenerateFit, PreconditionError


class Method(enum.Enum):
    ANALYTIC = "analytic"
    PAIRCOUNT = "paircount"
    QUADRATURE = "quadrature"


def _metric(measure: MeasureSpec, metric) -> Metric:
    if metric is None:
        return measure.default_metric
    return Metric(metric) if isinstance(metric, str) else metric


def _periodic_cdf(measure: MeasureSpec, x):
    x = np.asarray(x, dtype=float)
    fl = np.floor(x)
    return fl + measure.cdf(x - fl)


def ball_measure(measure: MeasureSpec, center, r, metric=None):
    """Mass of B(center, r) by CDF differences (vectorised over center).

    >>> round(ball_measure(MeasureSpec(MeasureKind.GAUSS), 0.5, 0.1), 5)
    0.19265
    """
    if np.any(np.asarray(r) <= 0):
        raise ValueError("r must be positive")
    c = np.asarray(center, dtype=float)
    if _metric(measure, metric) is Metric.CIRCLE:
        out = np.where(2 * np.asarray(r) >= 1.0, 1.0,
                       _periodic_cdf(measure, c + r) - _periodic_cdf(measure, c - r))
    else:
        out = measure.cdf(np.minimum(c + r, 1.0)) - measure.cdf(np.maximum(c - r, 0.0))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class CorrelationIntegral:
    measure: MeasureSpec
    r_grid: list
    values: list
    method: Method
    stderr: list = field(default_factory=list)
    metric: Metric = Metric.CIRCLE

    def rows(self):
        se = self.stderr or [float("nan")] * len(self.values)
        for r, v, s in zip(self.r_grid, self.values, se):
            yield r, v, s, self.method.value


@dataclass
class CorrelationDimensionEstimate:
    slope: float
    intercept: float
    r_range: tuple
    residual: float
    n_points: int


def dyadic_grid(j_min: int, j_max: int) -> list:
    """r = 2^-j for j = j_min..j_max (decreasing radii)."""
    return [2.0 ** -j for j in range(j_min, j_max + 1)]


def _analytic(r: float, metric: Metric) -> float:
    if metric is Metric.CIRCLE:
        return min(2.0 * r, 1.0)
    return 2.0 * r - r * r if r <= 1.0 else 1.0


def _quadrature_points(mu_ball: MeasureSpec, mu_int: MeasureSpec, r, metric):
    pts = set()
    cand = [r, 1.0 - r, 2 * r, 1.0 - 2 * r, 0.5]
    if metric is Metric.CIRCLE:
        cand += [0.5 - r, 0.5 + r]
    for x in cand:
        if 0.0 < x < 1.0:
            u = float(mu_int.cdf(x))
            if 1e-15 < u < 1 - 1e-15:
                pts.add(u)
    return sorted(pts)


def _integrate_ball(mu_ball, mu_int, r, metric, epsabs, epsrel=1.49e-8, limit=200):
    """Integral of mu_ball(B(y, r)) d mu_int(y) via y = F_int^{-1}(u).

    The substitution turns the 1/sqrt endpoint singularity of the logistic
    density into a smooth integrand.
    """
    def f(u):
        return ball_measure(mu_ball, mu_int.inv_cdf(u), r, metric)

    pts = _quadrature_points(mu_ball, mu_int, r, metric)
    edges = [0.0] + pts + [1.0]
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, epsabs=epsabs / len(edges), epsrel=epsrel, limit=limit)
        total += v
        err += e
    return total, err


def _pair_count(measure: MeasureSpec, r_grid, metric: Metric, samples: int,
                rng: np.random.Generator):
    x = np.sort(measure.inv_cdf(rng.random(samples)))
    m = samples
    vals, ses = [], []
    for r in r_grid:
        if metric is Metric.CIRCLE and r > 0.5:
            c = np.full(m, m - 1, dtype=np.int64)
        else:
            c = np.searchsorted(x, x + r, "left") - np.searchsorted(x, x - r, "right") - 1
            if metric is Metric.CIRCLE:
                c = c + np.searchsorted(x, x + r - 1.0, "left")
                c = c + (m - np.searchsorted(x, x - r + 1.0, "right"))
        ci = c / (m - 1)
        p = float(ci.mean())
        # variance of an order-2 U-statistic
        var = 4.0 * ci.var(ddof=1) / m + 2.0 * p * (1 - p) / (m * (m - 1))
        vals.append(p)
        ses.append(math.sqrt(max(var, 0.0)))
    return vals, ses


def correlation_integral(measure: MeasureSpec, r, method=Method.ANALYTIC, metric=None,
                         samples: int = 100_000, rng=None, seed: int = 0,
                         epsabs: float = 1e-9) -> CorrelationIntegral:
    """Correlation integral at one radius or a grid of radii."""
    method = Method(method) if isinstance(method, str) else method
    metric = _metric(measure, metric)
    grid = [float(v) for v in np.atleast_1d(r)]
    if any(v <= 0 for v in grid):
        raise ValueError("radii must be positive")
    stderr = []
    if method is Method.ANALYTIC:
        if measure.kind is not MeasureKind.LEBESGUE:
            raise PreconditionError("closed form available only for Lebesgue measure")
        values = [_analytic(v, metric) for v in grid]
    elif method is Method.PAIRCOUNT:
        if samples < 1000:
            raise PreconditionError("pair counting needs at least 1000 samples")
        rng = rng if rng is not None else np.random.default_rng(seed)
        values, stderr = _pair_count(measure, grid, metric, samples, rng)
    else:
        values = [min(1.0, _integrate_ball(measure, measure, v, metric, epsabs)[0]) for v in grid]
    return CorrelationIntegral(measure, grid, values, method, stderr, metric)


def cross_correlation_integral(mu1: MeasureSpec, mu2: MeasureSpec, r: float, metric=None,
                               epsabs: float = 1e-14) -> float:
    """Integral of mu1(B(y, r)) d mu2(y)."""
    if r <= 0:
        raise ValueError("r must be positive")
    if metric is None:
        metric = Metric.CIRCLE if (mu1.kind is mu2.kind is MeasureKind.LEBESGUE) else Metric.INTERVAL
    metric = Metric(metric) if isinstance(metric, str) else metric
    if mu1.kind is mu2.kind is MeasureKind.LEBESGUE:
        return _analytic(r, metric)
    v, _ = _integrate_ball(mu1, mu2, r, metric, epsabs, epsrel=1e-13, limit=500)
    return min(1.0, v)


def correlation_dimension(ci: CorrelationIntegral, r_range=None) -> CorrelationDimensionEstimate:
    """Least-squares slope of log C(r) against log r."""
    r = np.asarray(ci.r_grid, dtype=float)
    v = np.asarray(ci.values, dtype=float)
    keep = v > 0
    if r_range is not None:
        lo, hi = min(r_range), max(r_range)
        keep &= (r >= lo) & (r <= hi)
    r, v = r[keep], v[keep]
    if r.size < 5:
        raise DegenerateFit(f"need at least 5 positive grid points, have {r.size}")
    if np.all(v == v[0]):
        raise DegenerateFit("all correlation-integral values are equal")
    lx, ly = np.log(r), np.log(v)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return CorrelationDimensionEstimate(float(slope), float(intercept),
                                        (float(r.min()), float(r.max())), resid, int(r.size))


@dataclass
class TightnessEstimate:
    K: float
    r_grid: list
    ratios: list


def tightness_constant(measure: MeasureSpec, r_grid, metric=None,
                       refine: int = 1) -> TightnessEstimate:
    """Max over the grid of sup_y mu(B(y, r)) / sqrt(correlation integral).

    The sup is taken over centres spaced r / (8 * refine).
    """
    metric = _metric(measure, metric)
    ratios = []
    for r in r_grid:
        if not 0 < r <= 0.25:
            raise PreconditionError("radii must lie in (0, 1/4]")
        step = r / (8 * refine)
        centres = np.arange(0.0, 1.0 + 0.5 * step, step)
        sup = float(np.max(ball_measure(measure, centres, r, metric)))
        if measure.kind is MeasureKind.LEBESGUE:
            c = _analytic(r, metric)
        else:
            c = _integrate_ball(measure, measure, r, metric, 1e-12)[0]
        ratios.append(sup / math.sqrt(c))
    return TightnessEstimate(max(ratios), list(r_grid), ratios)


__all__ = [
    "Method", "ball_measure", "CorrelationIntegral", "CorrelationDimensionEstimate",
    "correlation_integral", "cross_correlation_integral", "correlation_dimension",
    "tightness_constant", "TightnessEstimate", "dyadic_grid", "LEBESGUE",
]
