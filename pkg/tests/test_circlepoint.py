from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitlab.circlepoint import (
    BITS, HALF, ONE, BitStreamPoint, CirclePoint, circle_distance, circle_distance_frac,
    interval_distance, interval_distance_frac, threshold_frac,
)
from orbitlab.errors import InsufficientDigits

fracs = st.integers(min_value=0, max_value=ONE - 1)


def cp(x):
    return CirclePoint.from_float(x)


@pytest.mark.parametrize("a,b,d", [(0.25, 0.25, 0.0), (0.1, 0.9, 0.2), (0.1, 0.3, 0.2)])
def test_circle_distance_examples(a, b, d):
    assert circle_distance(cp(a), cp(b)) == pytest.approx(d, abs=1e-15)


@given(fracs, fracs)
def test_distance_symmetric_and_bounded(a, b):
    d = circle_distance_frac(a, b)
    assert d == circle_distance_frac(b, a)
    assert 0 <= d <= HALF
    assert (d == 0) == (a == b)


@given(fracs, fracs, fracs)
def test_triangle_inequality(a, b, c):
    assert circle_distance_frac(a, c) <= circle_distance_frac(a, b) + circle_distance_frac(b, c)


@given(fracs, fracs)
def test_circle_at_most_interval(a, b):
    c, i = circle_distance_frac(a, b), interval_distance_frac(a, b)
    assert c <= i
    assert (c == i) == (abs(a - b) <= HALF)


@given(fracs)
def test_hex_roundtrip(f):
    p = CirclePoint(f)
    assert len(p.hex()) == 32
    assert CirclePoint.from_hex(p.hex()) == p
    hi, lo = p.limbs()
    assert CirclePoint.from_limbs(hi, lo) == p


@given(fracs, fracs)
def test_wrapping_arithmetic(a, b):
    p, q = CirclePoint(a), CirclePoint(b)
    assert (p + q) - q == p
    assert (p - q).frac == (a - b) % ONE
    assert (-p + p).frac == 0


@given(st.integers(min_value=1, max_value=BITS), st.integers(min_value=0))
def test_dyadic_quantization_exact(bits, num):
    num %= 1 << bits
    p = CirclePoint.from_fraction(num, 1 << bits)
    assert p.as_fraction() == Fraction(num, 1 << bits)


def test_quantization_error_bound():
    x = 0.1
    p = cp(x)
    assert 0 <= Fraction(x) - p.as_fraction() < Fraction(1, ONE)


def test_from_float_clamp():
    assert CirclePoint.from_float(1.0, clamp=True).frac == ONE - 1
    assert CirclePoint.from_float(-0.5, clamp=True).frac == 0
    with pytest.raises(ValueError):
        CirclePoint.from_float(float("nan"))
    with pytest.raises(ValueError):
        CirclePoint(ONE)


def test_interval_distance():
    assert interval_distance(cp(0.1), cp(0.9)) == pytest.approx(0.8)


def test_threshold_is_strict():
    # d < r  <=>  d <= threshold_frac(r)
    t = threshold_frac(0.25)
    assert t == ONE // 4 - 1
    assert threshold_frac(1e-300) == 0


@pytest.mark.parametrize("offset,value", [(0, 0.8125), (1, 0.625), (2, 0.25)])
def test_materialize_examples(offset, value):
    p = BitStreamPoint.from_string("1101")
    assert p.materialize(offset).value == value


def test_materialize_insufficient():
    p = BitStreamPoint.from_string("1101", pad=0)
    with pytest.raises(InsufficientDigits):
        p.materialize(0)


@given(st.integers(min_value=0, max_value=2 ** 32), st.integers(0, 40), st.integers(0, 40),
       st.sampled_from([2, 3, 4, 10]))
def test_materialize_shift_composition(seed, m, n, base):
    rng = np.random.default_rng(seed)
    p = BitStreamPoint.random(rng, 300, base)
    left = p.materialize(m + n)
    right = p.shift(m).materialize(n)
    assert left == right
    if base == 2:
        # one more shift of the 128-bit window is a left shift plus a fresh bit
        a, b = p.materialize(m).frac, p.materialize(m + 1).frac
        assert b >> 1 == a & ((ONE - 1) >> 1)


def test_bitstream_value():
    p = BitStreamPoint.from_string("1101")
    assert p.value() == Fraction(13, 16)
