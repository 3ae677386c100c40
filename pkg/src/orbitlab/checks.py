"""Engine-versus-oracle comparisons shared by the CLI and the test-suite."""
from __future__ import annotations

import numpy as np

from . import engine, oracles
from .circlepoint import CirclePoint
from .dynamics import OrbitStream, SystemKind, SystemSpec, random_orbit

SYSTEMS = ("kary:2", "kary:3", "rotation:golden", "logistic4", "gauss")


def engine_vs_brute_force(rng: np.random.Generator, configs: int = 100, N: int = 512,
                          systems=SYSTEMS) -> dict:
    """Compare full M_n traces (two-orbit and single-orbit) with O(N^2) scans."""
    mismatches = []
    for c in range(configs):
        s1 = SystemSpec.parse(systems[c % len(systems)])
        s2 = SystemSpec.parse(systems[(c // len(systems)) % len(systems)])
        if s1.circle != s2.circle:
            s2 = s1
        o1, _ = random_orbit(s1, rng, N)
        o2, _ = random_orbit(s2, rng, N)
        x, y = o1.fracs(), o2.fracs()
        two = engine.min_distance_trace(o1, o2, N)
        ref = oracles.brute_force_profile(x, y, s1.circle)
        if [two.frac(n) for n in range(1, N + 1)] != ref:
            mismatches.append({"config": c, "mode": "two", "systems": [s1.name, s2.name]})
        one = engine.min_distance_trace(o1, None, N)
        ref1 = oracles.brute_force_profile(x, None, s1.circle)
        if [one.frac(n) for n in range(1, N + 1)] != ref1:
            mismatches.append({"config": c, "mode": "single", "systems": [s1.name]})
    return {"check": "engine", "configs": configs, "N": N, "mismatches": mismatches,
            "ok": not mismatches}


def rotation_closed_form(rng: np.random.Generator, configs: int = 100, N: int = 4096) -> dict:
    """Engine traces against min over |k| < n of ||delta + k alpha|| for random (delta, alpha)."""
    mismatches = []
    for c in range(configs):
        w = rng.integers(0, 1 << 64, size=6, dtype=np.uint64)
        alpha = CirclePoint((int(w[0]) << 64) | int(w[1]))
        x0 = CirclePoint((int(w[2]) << 64) | int(w[3]))
        y0 = CirclePoint((int(w[4]) << 64) | int(w[5]))
        sys = SystemSpec(SystemKind.ROTATION, alpha=alpha)
        o1, o2 = OrbitStream(sys, x0, N), OrbitStream(sys, y0, N)
        tr = engine.min_distance_trace(o1, o2, N)
        ref = oracles.rotation_min_trace(x0 - y0, alpha, N)
        got = [tr.frac(n) for n in range(1, N + 1)]
        single = engine.min_distance_trace(o1, None, N)
        ref1 = oracles.rotation_min_trace(x0, alpha, N, single=True)
        got1 = [single.frac(n) for n in range(1, N + 1)]
        if got != ref or got1 != ref1:
            mismatches.append({"config": c, "alpha": alpha.hex()})
    return {"check": "rotation", "configs": configs, "N": N, "mismatches": mismatches,
            "ok": not mismatches}


def fourier_independence(rng: np.random.Generator, unequal: int = 50, equal: int = 20,
                         bits: int = 14, max_index: int = 3) -> dict:
    """Exact zeros for unequal gaps; grid quadrature against the series for equal gaps."""
    nonzero = []
    for _ in range(unequal):
        while True:
            i1, j1, i2, j2 = (int(v) for v in rng.integers(0, 12, size=4))
            if j1 - i1 != j2 - i2:
                break
        r1, r2 = (float(v) for v in rng.uniform(0.001, 0.25, size=2))
        v = oracles.pair_covariance_doubling(i1, j1, i2, j2, r1, r2)
        if v.value != 0.0:
            nonzero.append([i1, j1, i2, j2])
    tol = 2.0 ** -12
    worst, bad = 0.0, []
    for _ in range(equal):
        i1 = int(rng.integers(0, max_index))
        gap = int(rng.integers(1, max_index - i1 + 1))
        i2 = int(rng.integers(0, max_index - gap + 1))
        j1, j2 = i1 + gap, i2 + gap
        r1, r2 = (float(v) for v in rng.uniform(0.005, 0.25, size=2))
        series = oracles.pair_covariance_doubling(i1, j1, i2, j2, r1, r2).value
        grid = oracles.covariance_grid_oracle(i1, j1, i2, j2, r1, r2, bits=bits)
        err = abs(series - grid)
        worst = max(worst, err)
        if not err <= tol:
            bad.append({"indices": [i1, j1, i2, j2], "r": [r1, r2], "error": err})
    ok = not nonzero and not bad
    return {"check": "fourier", "nonzero_unequal_gaps": nonzero, "equal_gap_failures": bad,
            "max_equal_gap_error": worst, "tolerance": tol, "ok": ok}


def covering_sandwich(rng: np.random.Generator, pairs: int = 10_000, r: float = 2.0 ** -6) -> dict:
    cover = oracles.build_cover(r)
    w = rng.integers(0, 1 << 64, size=(pairs, 4), dtype=np.uint64)
    fails, max_mid = 0, 0
    for a, b, c, d in w.tolist():
        x, y = (a << 64) | b, (c << 64) | d
        lhs, mid, rhs = oracles.sandwich_terms(cover, x, y)
        max_mid = max(max_mid, mid)
        if not lhs <= mid <= rhs:
            fails += 1
    return {"check": "sandwich", "pairs": pairs, "r": r, "failures": fails,
            "max_middle": max_mid, "ok": fails == 0 and max_mid <= cover.overlap_bound}


def short_return(rng: np.random.Generator, samples: int = 1_000_000, ns=range(1, 11),
                 radii=(1e-3, 1e-2)) -> dict:
    rows = []
    ok = True
    for r in radii:
        for n in ns:
            p, sigma = oracles.short_return_monte_carlo(r, n, samples, rng)
            target = oracles.short_return_measure_doubling(r, n)
            z = (p - target) / sigma if sigma > 0 else 0.0
            ok &= abs(z) <= 3
            rows.append({"r": r, "n": n, "p": p, "target": target, "z": z})
    return {"check": "short-return", "samples": samples, "rows": rows, "ok": bool(ok)}


CHECKS = {
    "engine": engine_vs_brute_force,
    "rotation": rotation_closed_form,
    "fourier": fourier_independence,
    "sandwich": covering_sandwich,
    "short-return": short_return,
}

