"""Compiled inner loops.

128-bit values are carried as (hi, lo) pairs of uint64.  Every integer
constant that meets a uint64 is itself a uint64, otherwise numba promotes the
expression to float64.
"""
import numpy as np
from numba import njit

U0 = np.uint64(0)
U1 = np.uint64(1)
U6 = np.uint64(6)
U63 = np.uint64(63)
U64MAX = np.uint64(0xFFFFFFFFFFFFFFFF)

_jit = dict(cache=True, nogil=True)


# ---------------------------------------------------------------- 128-bit ops

@njit(**_jit)
def lt128(ahi, alo, bhi, blo):
    return ahi < bhi or (ahi == bhi and alo < blo)


@njit(**_jit)
def le128(ahi, alo, bhi, blo):
    return ahi < bhi or (ahi == bhi and alo <= blo)


@njit(**_jit)
def sub128(ahi, alo, bhi, blo):
    lo = alo - blo
    hi = ahi - bhi
    if alo < blo:
        hi = hi - U1
    return hi, lo


@njit(**_jit)
def add128(ahi, alo, bhi, blo):
    lo = alo + blo
    hi = ahi + bhi
    if lo < alo:
        hi = hi + U1
    return hi, lo


@njit(**_jit)
def neg128(hi, lo):
    nlo = (~lo) + U1
    nhi = ~hi
    if lo == U0:
        nhi = nhi + U1
    return nhi, nlo


@njit(**_jit)
def dist128(ahi, alo, bhi, blo, circle):
    if circle:
        hi, lo = sub128(ahi, alo, bhi, blo)
        if (hi >> U63) == U1:
            hi, lo = neg128(hi, lo)
        return hi, lo
    if lt128(ahi, alo, bhi, blo):
        return sub128(bhi, blo, ahi, alo)
    return sub128(ahi, alo, bhi, blo)


@njit(**_jit)
def msb64(x):
    n = 0
    if x >> np.uint64(32):
        x = x >> np.uint64(32)
        n += 32
    if x >> np.uint64(16):
        x = x >> np.uint64(16)
        n += 16
    if x >> np.uint64(8):
        x = x >> np.uint64(8)
        n += 8
    if x >> np.uint64(4):
        x = x >> np.uint64(4)
        n += 4
    if x >> np.uint64(2):
        x = x >> np.uint64(2)
        n += 2
    if x >> U1:
        n += 1
    return n


@njit(**_jit)
def lsb64(x):
    return msb64(x & ((~x) + U1))


# ------------------------------------------------- two-level bitset over ranks

@njit(**_jit)
def _below(b):
    # bits strictly below position b (0..63)
    return (U1 << np.uint64(b)) - U1


@njit(**_jit)
def _above(b):
    # bits strictly above position b (0..63)
    if b >= 63:
        return U0
    return ~((U1 << np.uint64(b + 1)) - U1)


@njit(**_jit)
def bs_insert(words, summ, r):
    w = r >> 6
    words[w] |= U1 << np.uint64(r & 63)
    summ[w >> 6] |= U1 << np.uint64(w & 63)


@njit(**_jit)
def _top_in_word(words, w):
    return w * 64 + msb64(words[w])


@njit(**_jit)
def _bottom_in_word(words, w):
    return w * 64 + lsb64(words[w])


@njit(**_jit)
def bs_pred(words, summ, r):
    """Largest member < r, or -1."""
    w = r >> 6
    if w < words.size:
        m = words[w] & _below(r & 63)
        if m != U0:
            return w * 64 + msb64(m)
    else:
        w = words.size
    sw = w >> 6
    if sw < summ.size:
        sm = summ[sw] & _below(w & 63)
        if sm != U0:
            return _top_in_word(words, sw * 64 + msb64(sm))
    else:
        sw = summ.size
    for s in range(sw - 1, -1, -1):
        if summ[s] != U0:
            return _top_in_word(words, s * 64 + msb64(summ[s]))
    return -1


@njit(**_jit)
def bs_succ(words, summ, r):
    """Smallest member > r, or -1.  r may be -1."""
    if r < 0:
        w = 0
        m = words[0]
    else:
        w = r >> 6
        m = words[w] & _above(r & 63)
    if m != U0:
        return w * 64 + lsb64(m)
    sw = w >> 6
    sm = summ[sw] & _above(w & 63)
    if sm != U0:
        return _bottom_in_word(words, sw * 64 + lsb64(sm))
    for s in range(sw + 1, summ.size):
        if summ[s] != U0:
            return _bottom_in_word(words, s * 64 + lsb64(summ[s]))
    return -1


def new_bitset(universe):
    nw = universe // 64 + 2
    ns = nw // 64 + 2
    return np.zeros(nw, np.uint64), np.zeros(ns, np.uint64)


@njit(**_jit)
def _nearest(words, summ, q, shi, slo, circle, universe):
    """Distance from the point of rank q to the nearest member (none -> max)."""
    bhi = U64MAX
    blo = U64MAX
    p = bs_pred(words, summ, q)
    s = bs_succ(words, summ, q)
    if circle:
        if p < 0:
            p = bs_pred(words, summ, universe)
        if s < 0:
            s = bs_succ(words, summ, -1)
    if p >= 0:
        bhi, blo = dist128(shi[q], slo[q], shi[p], slo[p], circle)
    if s >= 0:
        hi, lo = dist128(shi[q], slo[q], shi[s], slo[s], circle)
        if lt128(hi, lo, bhi, blo):
            bhi = hi
            blo = lo
    return bhi, blo


@njit(**_jit)
def two_orbit_trace(rx, ry, shi, slo, circle, words_x, summ_x, words_y, summ_y,
                    out_hi, out_lo):
    """out[n-1] = M_n = min over i, j < n of d(x_i, y_j)."""
    n = rx.size
    universe = shi.size
    bhi = U64MAX
    blo = U64MAX
    for i in range(n):
        bs_insert(words_x, summ_x, rx[i])
        if i > 0:
            hi, lo = _nearest(words_y, summ_y, rx[i], shi, slo, circle, universe)
            if lt128(hi, lo, bhi, blo):
                bhi = hi
                blo = lo
        bs_insert(words_y, summ_y, ry[i])
        hi, lo = _nearest(words_x, summ_x, ry[i], shi, slo, circle, universe)
        if lt128(hi, lo, bhi, blo):
            bhi = hi
            blo = lo
        out_hi[i] = bhi
        out_lo[i] = blo


@njit(**_jit)
def single_orbit_trace(rx, shi, slo, circle, words, summ, out_hi, out_lo):
    """out[n-1] = min over i < j < n of d(x_i, x_j); n = 1 stays at max."""
    n = rx.size
    universe = shi.size
    bhi = U64MAX
    blo = U64MAX
    for i in range(n):
        if i > 0:
            hi, lo = _nearest(words, summ, rx[i], shi, slo, circle, universe)
            if lt128(hi, lo, bhi, blo):
                bhi = hi
                blo = lo
        bs_insert(words, summ, rx[i])
        out_hi[i] = bhi
        out_lo[i] = blo


# ------------------------------------------------------------ orbit generation

@njit(**_jit)
def bit_window_orbit(bits, step, n, out_hi, out_lo):
    """Point i is the 128-bit window of ``bits`` starting at i*step."""
    hi = U0
    lo = U0
    for t in range(64):
        hi = (hi << U1) | np.uint64(bits[t])
    for t in range(64, 128):
        lo = (lo << U1) | np.uint64(bits[t])
    pos = 128
    for i in range(n):
        out_hi[i] = hi
        out_lo[i] = lo
        if i == n - 1:
            break
        for _ in range(step):
            hi = (hi << U1) | (lo >> U63)
            lo = (lo << U1) | np.uint64(bits[pos])
            pos += 1


@njit(**_jit)
def rotation_orbit(s_hi, s_lo, a_hi, a_lo, n, out_hi, out_lo):
    hi = s_hi
    lo = s_lo
    for i in range(n):
        out_hi[i] = hi
        out_lo[i] = lo
        hi, lo = add128(hi, lo, a_hi, a_lo)


@njit(**_jit)
def logistic_orbit(x0, n, out):
    x = x0
    for i in range(n):
        out[i] = x
        x = 4.0 * x * (1.0 - x)


@njit(**_jit)
def gauss_orbit(x0, n, out):
    """Returns the index of the first zero (orbit stops), or n."""
    x = x0
    for i in range(n):
        out[i] = x
        if x == 0.0:
            return i
        y = 1.0 / x
        x = y - np.floor(y)
    return n


# -------------------------------------------------------------------- counting

@njit(**_jit)
def lower_bound(shi, slo, qhi, qlo):
    """First index with s >= q in a sorted array."""
    a = 0
    b = shi.size
    while a < b:
        m = (a + b) >> 1
        if lt128(shi[m], slo[m], qhi, qlo):
            a = m + 1
        else:
            b = m
    return a


@njit(**_jit)
def upper_bound(shi, slo, qhi, qlo):
    """First index with s > q."""
    a = 0
    b = shi.size
    while a < b:
        m = (a + b) >> 1
        if le128(shi[m], slo[m], qhi, qlo):
            a = m + 1
        else:
            b = m
    return a


@njit(**_jit)
def count_within(shi, slo, qhi, qlo, thi, tlo, circle, out):
    """out[k] = #{s : d(q_k, s) <= T} over the sorted array (shi, slo).

    The caller guarantees T < 2^127 in the circle case (otherwise every point
    qualifies).
    """
    n = shi.size
    for k in range(qhi.size):
        ahi, alo = sub128(qhi[k], qlo[k], thi, tlo)
        bhi, blo = add128(qhi[k], qlo[k], thi, tlo)
        if circle:
            wrap_low = lt128(qhi[k], qlo[k], thi, tlo)
            wrap_high = lt128(bhi, blo, qhi[k], qlo[k])
            if wrap_low:
                c = upper_bound(shi, slo, bhi, blo) + (n - lower_bound(shi, slo, ahi, alo))
            elif wrap_high:
                c = (n - lower_bound(shi, slo, ahi, alo)) + upper_bound(shi, slo, bhi, blo)
            else:
                c = upper_bound(shi, slo, bhi, blo) - lower_bound(shi, slo, ahi, alo)
        else:
            if lt128(qhi[k], qlo[k], thi, tlo):
                lo_idx = 0
            else:
                lo_idx = lower_bound(shi, slo, ahi, alo)
            if lt128(bhi, blo, qhi[k], qlo[k]):
                hi_idx = n
            else:
                hi_idx = upper_bound(shi, slo, bhi, blo)
            c = hi_idx - lo_idx
        out[k] = c
