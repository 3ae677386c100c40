"""Acceptance criteria 1-12, each at its stated tolerance and runtime budget.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line; the lines are also
collected into the pytest terminal summary.
"""
import json
import math
import time

import numpy as np
import pytest

from orbitlab import checks, oracles
from orbitlab.circlepoint import CirclePoint
from orbitlab.cli import main
from orbitlab.dynamics import GAUSS_MEASURE, LEBESGUE, NAMED_ALPHAS
from orbitlab.experiments import run_experiment, trial_rng
from orbitlab.measures import Method, correlation_dimension, correlation_integral, dyadic_grid
from orbitlab.oracles import DiophantineForm, FormKind

RESULTS = []


class Criterion:
    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.detail = ""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        ok = exc_type is None and elapsed < self.budget
        why = "" if exc_type is None else f" [{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}]"
        line = (f"ACCEPTANCE {self.number:2d} {'PASS' if ok else 'FAIL'} {self.title}: "
                f"{self.detail}{why} ({elapsed:.1f}s / {self.budget:.0f}s)")
        print(line)
        RESULTS.append(line)
        if exc_type is None and not ok:
            pytest.fail(f"runtime {elapsed:.1f}s exceeds {self.budget}s")
        return False


def test_c01_engine_brute_force():
    with Criterion(1, "engine equals O(N^2) scans", 10) as c:
        r = checks.engine_vs_brute_force(trial_rng(2024, 1), configs=100, N=512)
        c.detail = f"{r['configs']} configs, N={r['N']}, mismatches={len(r['mismatches'])}"
        assert r["ok"]


def test_c02_rotation_closed_form():
    with Criterion(2, "rotation closed form", 5) as c:
        r = checks.rotation_closed_form(trial_rng(2024, 2), configs=100, N=4096)
        c.detail = f"{r['configs']} configs, n<={r['N']}, mismatches={len(r['mismatches'])}"
        assert r["ok"]


def test_c03_exponent_law():
    with Criterion(3, "exponent law doubling", 60) as c:
        res = run_experiment({"experiment": "exponent", "system1": "kary:2", "system2": "kary:2",
                              "trials": 200, "horizon": 1 << 14, "base_seed": 2024})
        med = res.summary["median_slope"]
        c.detail = f"median slope {med:.4f} in [1.7, 2.3]"
        assert 1.7 <= med <= 2.3


def test_c04_expectation_identity():
    with Criterion(4, "expectation identity", 60) as c:
        res = run_experiment({"experiment": "expectation", "system1": "kary:2", "system2": "kary:2",
                              "trials": 1000, "n_values": [8, 64, 512], "horizon": 512,
                              "schedules": ["powerlog:0.01,0,0,0", "powerlog:0.001,0,0,0"],
                              "base_seed": 2024})
        cells = res.summary["cells"]
        for cell in cells:
            assert cell["target"] == pytest.approx(cell["n"] ** 2 * min(2 * cell["r"], 1.0))
        zmax = max(abs(cell["z"]) for cell in cells)
        c.detail = f"{len(cells)} cells, max |z| = {zmax:.2f} <= 3"
        assert len(cells) == 6 and zmax <= 3


def test_c05_short_return():
    with Criterion(5, "short-return identity", 30) as c:
        r = checks.short_return(trial_rng(2024, 5), samples=1_000_000, ns=range(1, 11),
                                radii=(1e-3, 1e-2))
        zmax = max(abs(row["z"]) for row in r["rows"])
        c.detail = f"{len(r['rows'])} cells, max |z| = {zmax:.2f} <= 3"
        assert r["ok"]


def test_c06_fourier_independence():
    with Criterion(6, "Fourier independence", 60) as c:
        r = checks.fourier_independence(trial_rng(2024, 6), unequal=50, equal=20, bits=14)
        c.detail = (f"nonzero unequal-gap={len(r['nonzero_unequal_gaps'])}, "
                    f"max equal-gap error {r['max_equal_gap_error']:.3g} <= {r['tolerance']:.3g}")
        assert r["ok"]


def test_c07_dichotomy_trend():
    with Criterion(7, "dichotomy trend", 300) as c:
        res = run_experiment({"experiment": "dichotomy", "system1": "kary:2", "system2": "kary:2",
                              "trials": 500, "horizon": 1 << 16, "tail_from": [4, 10],
                              "schedules": ["inv_n2_log", "inv_n2_log3"], "base_seed": 2024})
        div, conv = res.summary["schedules"]
        wins = dict(zip(div["window_k"], div["window_hit_fraction"]))
        low = min(wins[k] for k in range(10, 16))
        early, late = conv["any_hit_from_2^m"]["4"], conv["any_hit_from_2^m"]["10"]
        p = conv["sign_test"]["p_value"]
        c.detail = (f"divergent min window fraction k=10..15 {low:.3f} >= 0.05; convergent "
                    f"after-2^10 {late:.3f} <= half of after-2^4 {early:.3f}; sign p={p:.2g} < 0.01")
        assert low >= 0.05 and late <= 0.5 * early and p < 0.01


def test_c08_correlation_dimension():
    with Criterion(8, "correlation dimension", 60) as c:
        grid = dyadic_grid(4, 14)
        leb = correlation_dimension(correlation_integral(LEBESGUE, grid)).slope
        gauss = correlation_dimension(correlation_integral(GAUSS_MEASURE, grid, Method.PAIRCOUNT,
                                                           samples=100_000, seed=2024)).slope
        c.detail = f"Lebesgue analytic {leb:.6f}, Gauss pair-count {gauss:.4f}"
        assert abs(leb - 1.0) <= 1e-3 and 0.95 <= gauss <= 1.05


def test_c09_diophantine_oracle():
    from fractions import Fraction
    with Criterion(9, "Diophantine oracle golden ratio", 5) as c:
        prof = oracles.continued_fraction("golden", qmax=10 ** 6)
        rep = oracles.diophantine_condition(prof, DiophantineForm(FormKind.EXPONENT), 10 ** 6)
        point = CirclePoint(NAMED_ALPHAS["golden"])
        alpha = point.as_fraction()
        exact = oracles.continued_fraction(point, qmax=10 ** 6)
        bad = [q for p, q in exact.convergents[1:] if not abs(alpha - Fraction(p, q)) < Fraction(1, q * q)]
        c.detail = f"tail liminf q||q alpha|| = {rep.tail_liminf:.5f}, reconstruction failures={len(bad)}"
        assert abs(rep.tail_liminf - 0.447) <= 0.005 and not bad


def test_c10_covering_sandwich():
    with Criterion(10, "covering sandwich", 5) as c:
        r = checks.covering_sandwich(trial_rng(2024, 10), pairs=10_000, r=2.0 ** -6)
        c.detail = f"{r['pairs']} pairs, failures={r['failures']}, max middle sum {r['max_middle']} <= 5"
        assert r["failures"] == 0 and r["max_middle"] <= 5


def test_c11_harman_ratio():
    with Criterion(11, "Harman ratio decrease", 60) as c:
        res = run_experiment({"experiment": "harman", "schedules": ["inv_n2_log"],
                              "nmax": 1 << 20, "base_seed": 0})
        best = res.summary["best_decrease"]
        c.detail = (f"largest ratio decrease over a doubling of sum j r_j is {best:.3f} "
                    f"(need >= 0.40); ratio*sum stays <= {res.summary['max_ratio_times_S']:.3f}")
        assert best >= 0.4


def test_c12_determinism(tmp_path):
    configs = [
        {"experiment": "dichotomy", "system1": "kary:2", "system2": "kary:2", "trials": 64,
         "horizon": 1 << 13, "schedules": ["inv_n2_log", "inv_n2_log3"], "base_seed": 12},
        {"experiment": "exponent", "system1": "gauss", "system2": "gauss", "trials": 32,
         "horizon": 1 << 12, "base_seed": 12},
        {"experiment": "liminf", "system1": "logistic4", "system2": "logistic4", "trials": 40,
         "horizon": 1 << 12, "schedules": ["log_loglog2_n2"], "base_seed": 12},
        {"experiment": "expectation", "system1": "kary:3", "system2": "kary:3", "trials": 100,
         "n_values": [16, 128], "horizon": 128, "schedules": ["powerlog:0.01,0,0,0"], "base_seed": 12},
    ]
    with Criterion(12, "determinism across thread counts", 120) as c:
        differing = []
        for i, cfg in enumerate(configs):
            src = tmp_path / f"cfg{i}.json"
            src.write_text(json.dumps(cfg))
            first = tmp_path / f"run{i}_first"
            assert main(["experiment", "--config", str(src), "--out-dir", str(first), "--threads", "1"]) == 0
            manifest = first / "experiment.manifest.json"
            ref = (first / f"{cfg['experiment']}.csv").read_bytes()
            for k in (1, 4, 16):
                d = tmp_path / f"run{i}_{k}"
                assert main(["experiment", "--config", str(manifest), "--out-dir", str(d),
                             "--threads", str(k)]) == 0
                if (d / f"{cfg['experiment']}.csv").read_bytes() != ref:
                    differing.append((cfg["experiment"], k))
        c.detail = f"{len(configs)} experiments x threads 1,4,16, differing CSVs={len(differing)}"
        assert not differing


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
