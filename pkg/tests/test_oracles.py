import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitlab import oracles
from orbitlab.circlepoint import ONE, CirclePoint, circle_distance_frac
from orbitlab.dynamics import NAMED_ALPHAS
from orbitlab.errors import PrecisionExhausted
from orbitlab.oracles import DiophantineForm, FormKind

GOLDEN = CirclePoint(NAMED_ALPHAS["golden"])


@pytest.mark.parametrize("r", [0.001, 0.01, 0.2, 0.37])
def test_fourier_coefficients(r):
    f = oracles.FourierIndicator(r)
    assert f.coef(0) == pytest.approx(2 * r)
    ks = np.arange(1, 2000)
    c = f.coef(ks)
    assert np.allclose(c, np.sin(2 * np.pi * ks * r) / (np.pi * ks))
    assert np.all(np.abs(c) <= np.minimum(2 * r, 1 / (np.pi * ks)) + 1e-15)
    assert np.allclose(f.coef(-ks), c)


def test_covariance_unequal_gap_exact_zero():
    assert oracles.pair_covariance_doubling(0, 1, 0, 2, 0.1, 0.2).value == 0.0
    rng = np.random.default_rng(0)
    for _ in range(50):
        i1, j1, i2, j2 = rng.integers(0, 20, size=4)
        if j1 - i1 != j2 - i2:
            assert oracles.pair_covariance_doubling(i1, j1, i2, j2, 0.05, 0.01).value == 0.0


def test_covariance_bound_example():
    v = oracles.pair_covariance_doubling(0, 1, 1, 2, 0.01, 0.01)
    assert abs(v.value) <= 8 * 0.01 * 2 ** -0.5


@pytest.mark.parametrize("p", [1, 2, 5, 10])
@pytest.mark.parametrize("r1,r2", [(0.01, 0.02), (0.1, 0.003), (0.3, 0.3)])
def test_series_truncation_within_tail_bound(p, r1, r2):
    a = oracles.pair_covariance_doubling(0, 1, p, 1 + p, r1, r2, kmax=1 << 12)
    b = oracles.pair_covariance_doubling(0, 1, p, 1 + p, r1, r2, kmax=1 << 13)
    assert abs(a.value - b.value) <= a.tail_bound
    c = oracles.pair_covariance_doubling(0, 1, p, 1 + p, r1, r2, method="closed")
    full = oracles.pair_covariance_doubling(0, 1, p, 1 + p, r1, r2)
    assert abs(full.value - c.value) <= full.tail_bound + 1e-12


def test_grid_oracle_agreement():
    rng = np.random.default_rng(1)
    for _ in range(5):
        r1, r2 = rng.uniform(0.01, 0.25, size=2)
        series = oracles.pair_covariance_doubling(0, 1, 1, 2, r1, r2).value
        grid = oracles.covariance_grid_oracle(0, 1, 1, 2, r1, r2, bits=14)
        assert abs(series - grid) <= 2 ** -12


def test_harman_terms_match_scalar():
    j1 = np.array([3, 5, 9])
    r1 = np.array([0.01, 0.004, 0.002])
    r2 = np.array([0.002, 0.001, 0.0005])
    v = oracles.harman_numerator_terms(j1, j1 + 2, r1, r2)
    for k in range(3):
        ref = oracles.pair_covariance_doubling(0, int(j1[k]), 2, int(j1[k]) + 2, r1[k], r2[k]).value
        assert v[k] == pytest.approx(ref, abs=1e-12)


def test_lag_covariance():
    for lag in range(1, 8):
        assert oracles.lag_covariance_doubling((0, 0.5), (0, 0.5), lag) == 0
    assert oracles.lag_covariance_doubling((0, 0.25), (0, 0.25), 1) == Fraction(1, 16)
    for lag in range(0, 6):
        exact = float(oracles.lag_covariance_doubling((0.1, 0.35), (0.2, 0.7), lag))
        assert oracles.lag_covariance_fourier((0.1, 0.35), (0.2, 0.7), lag) == pytest.approx(exact, abs=1e-4)


def test_short_return_examples():
    assert oracles.short_return_measure_doubling(0.01, 3) == 0.02
    assert oracles.short_return_measure_doubling(0.6, 3) == 1.0
    for n in (1, 5, 10):
        for r in (1e-3, 1e-2):
            assert oracles.short_return_measure_doubling(r, n) <= 2 * r ** 1
    p, sigma = oracles.short_return_monte_carlo(0.01, 3, 10 ** 6, np.random.default_rng(3))
    assert abs(p - 0.02) <= 3 * sigma


def test_rotation_min_distance_examples():
    a = GOLDEN
    assert oracles.rotation_min_distance(CirclePoint(0), a, 10) == 0
    d = oracles.rotation_min_distance(CirclePoint.from_float(0.5), a, 2) / ONE
    assert d == pytest.approx(0.118034, abs=1e-6)


def test_single_rotation_minima_at_fibonacci():
    fib = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144]
    trace = oracles.rotation_min_trace(CirclePoint(0), GOLDEN, 145, single=True)
    for f in fib[1:]:
        # minimum over 1 <= k <= f is attained at k = f
        assert trace[f] == min(oracles._norm(k * GOLDEN.frac) for k in range(1, f + 1))
        assert trace[f] == oracles._norm(f * GOLDEN.frac)


def test_continued_fraction_tags():
    g = oracles.continued_fraction("golden", depth=20)
    assert g.partial_quotients == [0] + [1] * 20
    s = oracles.continued_fraction("sqrt2-1", depth=20)
    assert s.partial_quotients == [0] + [2] * 20
    # the 128-bit golden value agrees with the symbolic expansion where valid
    c = oracles.continued_fraction(GOLDEN)
    assert set(c.partial_quotients[1:]) == {1}
    assert c.valid_depth > 80


@settings(max_examples=50)
@given(st.integers(1, ONE - 1))
def test_convergent_reconstruction(a):
    alpha = CirclePoint(a)
    prof = oracles.continued_fraction(alpha)
    x = Fraction(a, ONE)
    for p, q in prof.convergents[1:]:
        assert abs(x - Fraction(p, q)) < Fraction(1, q * q)


def test_precision_exhausted():
    prof = oracles.continued_fraction(GOLDEN)
    with pytest.raises(PrecisionExhausted):
        oracles.continued_fraction(GOLDEN, depth=prof.valid_depth + 5)
    with pytest.raises(PrecisionExhausted):
        oracles.diophantine_condition(prof, DiophantineForm(FormKind.EXPONENT), 10 ** 40)


def test_golden_exponent_liminf():
    prof = oracles.continued_fraction("golden", qmax=10 ** 6)
    rep = oracles.diophantine_condition(prof, DiophantineForm(FormKind.EXPONENT), 10 ** 6)
    assert abs(rep.tail_liminf - 1 / math.sqrt(5)) < 0.005
    assert rep.min_margin > 0.43


def test_golden_log_squared_margin_trace():
    prof = oracles.continued_fraction("golden", qmax=10 ** 6)
    rep = oracles.diophantine_condition(prof, DiophantineForm(FormKind.LOG_SQUARED, eps=0.1), 10 ** 6)
    assert rep.verdict == "Undetermined"
    margins = [m for _, m in rep.trace]
    assert min(margins) > 0 and len(margins) > 20
    # q^2 ||q alpha|| ~ q / sqrt 5 outgrows (log q)^2 (loglog q)^1.1 eventually
    assert margins[-1] > margins[len(margins) // 2]


def test_growing_quotients_decay():
    prof = oracles.continued_fraction(lambda k: k, qmax=10 ** 12)
    rep = oracles.diophantine_condition(prof, DiophantineForm(FormKind.EXPONENT), 10 ** 12)
    m = [v for _, v in rep.trace]
    assert m[-1] < m[0] / 2
    assert all(b < a * 1.5 for a, b in zip(m, m[1:]))


def test_unique_return_examples():
    ok, j = oracles.unique_return_check(GOLDEN, 10, 0.01)
    assert ok and j == 8
    assert oracles._norm(8 * GOLDEN.frac) / ONE == pytest.approx(0.0557, abs=1e-4)
    assert oracles.unique_return_check(GOLDEN, 10, 0.25)[0] is False
    ok, j = oracles.unique_return_check(CirclePoint.from_float(0.5), 3, 0.1)
    assert not ok and j == 2


def test_cover_structure():
    r = 2 ** -6
    cover = oracles.build_cover(r)
    assert cover.k == 64
    with pytest.raises(ValueError):
        oracles.build_cover(0.2)
    rng = np.random.default_rng(2)
    for f in rng.integers(0, 1 << 64, size=2000, dtype=np.uint64).tolist():
        x = f << 64
        hits = oracles.cover_hits(cover, x)
        brute = [p for p in range(cover.k) if circle_distance_frac(x, cover.center(p)) <= cover.threshold]
        assert sorted(hits) == brute
        assert 1 <= len(hits) <= 5


def test_sandwich_examples():
    cover = oracles.build_cover(2 ** -6)
    x = CirclePoint.from_float(0.3).frac
    near = CirclePoint.from_float(0.3 + 0.5 * 2 ** -6).frac
    far = CirclePoint.from_float(0.3 + 5 * 2 ** -6).frac
    assert oracles.sandwich_terms(cover, x, near)[1] >= 1
    assert oracles.sandwich_terms(cover, x, far)[1] == 0
    assert oracles.indicator_sandwich_check(cover, x, near)


def test_brute_force_profile_small():
    x = [CirclePoint.from_float(v).frac for v in (0.1, 0.2)]
    y = [CirclePoint.from_float(v).frac for v in (0.3, 0.6)]
    prof = oracles.brute_force_profile(x, y)
    assert prof[1] / ONE == pytest.approx(0.1)
    assert oracles.brute_force_profile(x)[0] is None
