"""Deterministic, parallel Monte Carlo experiments.

Trial t draws all its randomness from
``default_rng(SeedSequence(base_seed, spawn_key=(t,)))``, so results do not
depend on scheduling; results are reduced in trial order.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np
from scipy import stats

from . import engine, oracles
from .circlepoint import ONE
from .dynamics import Exactness, SystemKind, SystemSpec, random_orbit
from .errors import ConfigError, DegenerateOrbit, PreconditionError
from .measures import cross_correlation_integral
from .schedules import classify_sum_n_rn, parse as parse_schedule

EXPERIMENTS = ("exponent", "expectation", "dichotomy", "liminf", "rotation_mixed",
               "mixing_decay", "harman")


def _schema() -> dict:
    with resources.files("orbitlab").joinpath("schema/experiment.schema.json").open() as fh:
        return json.load(fh)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


@dataclass
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, _schema())
        except jsonschema.ValidationError as e:
            raise ConfigError(f"config invalid: {e.message}") from None
        return cls(dict(d))

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        """Load a config file, or the ``config`` entry of a run manifest."""
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if isinstance(d, dict) and "manifest_version" in d:
            d = d.get("config")
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def __getitem__(self, k):
        return self.raw[k]

    def get(self, k, default=None):
        return self.raw.get(k, default)

    @property
    def experiment(self) -> str:
        return self.raw["experiment"]

    @property
    def sha256(self) -> str:
        return config_hash(self.raw)

    def schedules(self) -> list:
        names = self.raw.get("schedules") or ([self.raw["schedule"]] if "schedule" in self.raw else [])
        return [parse_schedule(s) for s in names]

    def system(self, which: int):
        name = self.raw.get(f"system{which}")
        if name is None:
            return None
        return SystemSpec.parse(name, self.raw.get("metric"))


def trial_rng(base_seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(t,)))


def default_threads() -> int:
    env = os.environ.get("ORBITLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("ORBITLAB_THREADS must be an integer") from None
    return os.cpu_count() or 1


def run_trials(fn, trials: int, base_seed: int, threads: int | None = None) -> list:
    """fn(t, rng) for t in range(trials); results in trial order."""
    threads = threads or default_threads()
    jobs = [(t, trial_rng(base_seed, t)) for t in range(trials)]
    if threads == 1 or trials < 2:
        return [fn(t, rng) for t, rng in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


@dataclass
class ExperimentResult:
    name: str
    columns: list
    rows: list
    summary: dict
    config: ExperimentConfig | None = None
    exactness: str = ""
    notes: list = field(default_factory=list)

    def csv_text(self) -> str:
        buf = io.StringIO()
        if self.config is not None:
            buf.write(f"# config_sha256={self.config.sha256}\n")
        buf.write(f"# experiment={self.name}\n")
        if self.exactness:
            buf.write(f"# exactness={self.exactness}\n")
        for note in self.notes:
            buf.write(f"# {note}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(_jsonable(self.summary), indent=2, sort_keys=True) + "\n"


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def _exactness(*systems) -> str:
    ex = [s.exactness.value for s in systems if s is not None]
    return "+".join(ex)


def _orbits(cfg: ExperimentConfig, rng, horizon: int):
    s1, s2 = cfg.system(1), cfg.system(2)
    if s1 is None:
        raise ConfigError("system1 is required")
    o1, k1 = random_orbit(s1, rng, horizon)
    if s2 is None:
        return o1, None, k1
    o2, k2 = random_orbit(s2, rng, horizon)
    return o1, o2, k1 + k2


def _trace(o1, o2, N):
    return engine.min_distance_trace(o1, o2, N)


def _dyadic_ks(N: int) -> list:
    return [k for k in range(0, 64) if (1 << k) <= N]


def _cross_target(cfg: ExperimentConfig, r: float) -> float:
    s1, s2 = cfg.system(1), cfg.system(2) or cfg.system(1)
    return cross_correlation_integral(s1.measure, s2.measure, r, metric=s1.metric)


# ------------------------------------------------------------------ exponent

def exponent_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    N = cfg["horizon"]
    if N < 1 << 12:
        raise PreconditionError("exponent experiment needs horizon >= 2^12")
    ks = _dyadic_ks(N)
    fit_ks = ks[len(ks) // 2:]
    max_resample = cfg.get("max_resample", 20)

    def trial(t, rng):
        resampled = 0
        for _ in range(max_resample + 1):
            o1, o2, gauss_resamples = _orbits(cfg, rng, N)
            resampled += gauss_resamples
            tr = _trace(o1, o2, N)
            m = [tr.frac(1 << k) for k in fit_ks]
            if all(v is not None and v > 0 for v in m):
                x = -np.log(np.array([float(1 << k) for k in fit_ks]))
                y = np.log(np.array([v / ONE for v in m]))
                slope, intercept = np.polyfit(x, y, 1)
                return float(slope), float(intercept), resampled
            resampled += 1
        raise DegenerateOrbit(f"trial {t}: degenerate orbit after {max_resample} resamples")

    res = run_trials(trial, cfg["trials"], cfg["base_seed"], threads)
    slopes = np.array([r[0] for r in res])
    rows = [(t, s, b, k) for t, (s, b, k) in enumerate(res)]
    q25, med, q75 = np.percentile(slopes, [25, 50, 75])
    summary = {
        "experiment": "exponent", "trials": len(res), "horizon": N,
        "fit_checkpoints": [1 << k for k in fit_ks],
        "median_slope": float(med), "iqr": [float(q25), float(q75)],
        "mean_slope": float(slopes.mean()),
        "stderr_mean": float(slopes.std(ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else None,
        "resampled": int(sum(r[2] for r in res)),
    }
    return ExperimentResult("exponent", ["trial_id", "slope", "intercept", "resampled"], rows,
                            summary, cfg, _exactness(cfg.system(1), cfg.system(2)))


# --------------------------------------------------------------- expectation

def expectation_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    scheds = cfg.schedules()
    n_values = sorted(cfg.get("n_values") or engine.dyadic_checkpoints(cfg["horizon"]))
    N = max(n_values)
    if cfg.system(2) is None:
        raise ConfigError("expectation experiment needs two systems")

    def trial(t, rng):
        o1, o2, _ = _orbits(cfg, rng, N)
        return [[engine.count_s(o1, o2, n, s.eval(n)) for n in n_values] for s in scheds]

    res = run_trials(trial, cfg["trials"], cfg["base_seed"], threads)
    M = len(res)
    rows, table = [], []
    for t, per in enumerate(res):
        for si, vals in enumerate(per):
            for n, v in zip(n_values, vals):
                rows.append((t, si, n, v))
    for si, s in enumerate(scheds):
        for ni, n in enumerate(n_values):
            x = np.array([res[t][si][ni] for t in range(M)], dtype=float)
            r = s.eval(n)
            target = n * n * _cross_target(cfg, r)
            mean = float(x.mean())
            var = float(x.var(ddof=1)) if M > 1 else 0.0
            se = math.sqrt(var / M)
            z = (mean - target) / se if se > 0 else (0.0 if mean == target else float("inf"))
            table.append({"schedule": s.name, "n": n, "r": r, "mean": mean, "var": var,
                          "stderr": se, "target": target, "z": z})
    summary = {"experiment": "expectation", "trials": M, "cells": table}
    return ExperimentResult("expectation", ["trial_id", "schedule_idx", "n", "S_n"], rows,
                            summary, cfg, _exactness(cfg.system(1), cfg.system(2)))


# --------------------------------------------------------- hit-based statistics

def _window_hits(h: np.ndarray, N: int) -> list:
    out = []
    for k in _dyadic_ks(N):
        a, b = (1 << k) - 1, min((1 << (k + 1)) - 1, N)
        out.append(bool(h[a:b].any()))
    return out


def _any_hit_from(h: np.ndarray, n0: int, n1: int | None = None) -> bool:
    return bool(h[n0 - 1:(n1 - 1 if n1 else None)].any())


def _hit_statistics(cfg, threads, scale=1.0, single=False):
    scheds = cfg.schedules()
    N = cfg["horizon"]
    ks = _dyadic_ks(N)
    tails = cfg.get("tail_from", [4, 10])

    def trial(t, rng):
        o1, o2, _ = _orbits(cfg, rng, N)
        tr = _trace(o1, None if single else o2, N)
        out = []
        for s in scheds:
            h = tr.hits(engine.thresholds(s, N, scale))
            first = int(np.argmax(h)) + 1 if h.any() else None
            cp = [bool(h[(1 << k) - 1]) for k in ks]
            out.append((_window_hits(h, N), cp, first,
                        [_any_hit_from(h, 1 << m) for m in tails],
                        _any_hit_from(h, 1 << tails[0], 1 << tails[-1])))
        return out

    return scheds, ks, tails, run_trials(trial, cfg["trials"], cfg["base_seed"], threads)


def _sign_test(res, si) -> dict:
    """Early-window hits [2^a, 2^b) against late hits [2^b, N], paired per trial."""
    early = np.array([r[si][4] for r in res])
    late = np.array([r[si][3][-1] for r in res])
    b = int(np.sum(early & ~late))
    c = int(np.sum(~early & late))
    p = float(stats.binomtest(b, b + c, 0.5, alternative="greater").pvalue) if b + c else 1.0
    return {"early_only": b, "late_only": c, "p_value": p}


def dichotomy_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    scheds, ks, tails, res = _hit_statistics(cfg, threads, cfg.get("radius_scale", 1.0),
                                             single=cfg.system(2) is None)
    rows = []
    for t, per in enumerate(res):
        for si, (win, _, first, _, _) in enumerate(per):
            for k, w in zip(ks, win):
                rows.append((t, si, k, w))
    M = len(res)
    out = []
    for si, s in enumerate(scheds):
        frac = [float(np.mean([r[si][0][i] for r in res])) for i in range(len(ks))]
        tail = {str(m): float(np.mean([r[si][3][j] for r in res])) for j, m in enumerate(tails)}
        rep = classify_sum_n_rn(s, horizon=1 << 12)
        out.append({"schedule": s.name, "label": rep.label, "window_k": ks,
                    "window_hit_fraction": frac, "any_hit_from_2^m": tail,
                    "sign_test": _sign_test(res, si),
                    "first_hit_median": _median_or_none([r[si][2] for r in res])})
    summary = {"experiment": cfg.experiment, "trials": M, "horizon": cfg["horizon"],
               "schedules": out}
    return ExperimentResult(cfg.experiment, ["trial_id", "schedule_idx", "k", "window_hit"], rows,
                            summary, cfg, _exactness(cfg.system(1), cfg.system(2)),
                            notes=["trend tolerances are implementation-calibrated"])


def _median_or_none(vals):
    v = [x for x in vals if x is not None]
    return float(np.median(v)) if v else None


def liminf_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    single = cfg.system(2) is None
    scheds, ks, tails, res = _hit_statistics(cfg, threads, cfg.get("radius_scale", 1.0), single)
    k0 = cfg.get("k0", 4)
    kmax = cfg.get("kmax", ks[-1])
    sel = [i for i, k in enumerate(ks) if k0 <= k <= kmax]
    rows = []
    for t, per in enumerate(res):
        for si, (_, cp, _, _, _) in enumerate(per):
            for i in sel:
                rows.append((t, si, ks[i], cp[i]))
    out = []
    for si, s in enumerate(scheds):
        trace = []
        for j in range(len(sel)):
            idx = sel[:j + 1]
            trace.append(float(np.mean([all(r[si][1][i] for i in idx) for r in res])))
        out.append({"schedule": s.name, "k0": k0, "kmax": [ks[i] for i in sel],
                    "all_checkpoint_hit_fraction": trace})
    summary = {"experiment": cfg.experiment, "trials": len(res), "single_orbit": single,
               "radius_scale": cfg.get("radius_scale", 1.0), "schedules": out}
    return ExperimentResult(cfg.experiment, ["trial_id", "schedule_idx", "k", "checkpoint_hit"],
                            rows, summary, cfg, _exactness(cfg.system(1), cfg.system(2)))


def rotation_mixed_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    rot = cfg.system(2)
    if rot is None or rot.kind is not SystemKind.ROTATION:
        raise ConfigError("rotation_mixed needs system2 = rotation:<angle>")
    N = cfg["horizon"]
    alpha = rot.alpha
    if oracles.rotation_min_distance(alpha, alpha, N, single=True) == 0:
        raise PreconditionError("rotation angle is periodic within the horizon (rational-like)")
    prof = oracles.continued_fraction(rot.alpha_tag or alpha, qmax=N)
    dioph = {}
    for form in (oracles.DiophantineForm(oracles.FormKind.EXPONENT),
                 oracles.DiophantineForm(oracles.FormKind.LOG_SQUARED, eps=cfg.get("epsilon", 0.1))):
        try:
            dioph[form.kind.value] = oracles.diophantine_condition(prof, form, N).to_json()
        except Exception as e:  # noqa: BLE001 - attached as evidence only
            dioph[form.kind.value] = {"error": str(e)}
    d = dichotomy_experiment(cfg, threads)
    li = liminf_experiment(cfg, threads)
    summary = {"experiment": "rotation_mixed", "windows": d.summary, "liminf": li.summary,
               "diophantine": dioph}
    return ExperimentResult("rotation_mixed", d.columns, d.rows, summary, cfg, d.exactness)


# -------------------------------------------------------------------- mixing

def _apply_lag(system: SystemSpec, x0, lag: int):
    kind = system.kind
    if kind is SystemKind.KARY:
        hi, lo = x0
        k = np.uint64(system.k)
        # exact k^lag x mod 1 on the 128-bit grid, done limb-wise for k = 2
        if system.k == 2:
            if lag == 0:
                return hi.copy(), lo.copy()
            if lag < 64:
                return (hi << np.uint64(lag)) | (lo >> np.uint64(64 - lag)), lo << np.uint64(lag)
            return lo << np.uint64(lag - 64), np.zeros_like(lo)
        h = hi.copy()
        for _ in range(lag):
            h = h * k
        return h, np.zeros_like(lo)
    if kind is SystemKind.ROTATION:
        a = system.alpha.value
        return np.mod(x0 + lag * a, 1.0)
    x = x0.copy()
    for _ in range(lag):
        if kind is SystemKind.LOGISTIC4:
            x = 4.0 * x * (1.0 - x)
        else:
            with np.errstate(divide="ignore"):
                y = 1.0 / x
            x = np.where(x > 0, y - np.floor(y), 0.0)
    return x


def _to_unit(system, x):
    if system.kind is SystemKind.KARY:
        hi, lo = x
        return np.ldexp(hi.astype(float), -64) + np.ldexp(lo.astype(float), -128)
    return x


def mixing_decay_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    system = cfg.system(1)
    lags = cfg.get("lags") or list(range(1, 21))
    M = cfg.get("samples", 100_000)
    if M < 100_000:
        raise PreconditionError("mixing decay needs at least 10^5 samples")
    psi = cfg.get("psi", [0.0, 0.25])
    phi = cfg.get("phi", psi)
    rng = trial_rng(cfg["base_seed"], 0)
    if system.kind is SystemKind.KARY:
        w = rng.integers(0, 1 << 64, size=(2, M), dtype=np.uint64)
        x0 = (w[0], w[1])
    elif system.kind is SystemKind.ROTATION:
        x0 = rng.random(M)
    else:
        x0 = system.measure.inv_cdf(rng.random(M))
    u0 = _to_unit(system, x0)
    a = ((u0 >= psi[0]) & (u0 < psi[1])).astype(float)
    rows, covs, ses = [], [], []
    exact_line = system.kind is SystemKind.KARY and system.k == 2
    for lag in lags:
        u = _to_unit(system, _apply_lag(system, x0, lag))
        b = ((u >= phi[0]) & (u < phi[1])).astype(float)
        da, db = a - a.mean(), b - b.mean()
        prod = da * db
        cov = float(prod.mean())
        se = float(prod.std(ddof=1) / math.sqrt(M))
        ex = float(oracles.lag_covariance_doubling(psi, phi, lag)) if exact_line else None
        rows.append((lag, cov, se, ex))
        covs.append(cov)
        ses.append(se)
    covs, ses = np.array(covs), np.array(ses)
    sig = np.abs(covs) > 3 * ses
    run = 0
    while run < len(lags) and sig[run]:
        run += 1
    second = sig[len(lags) // 2:]
    non_mixing = bool(second.size and second.mean() >= 0.25)
    fit = {"theta": None, "theta_lower_bound": None, "fit_lags": lags[:run]}
    if run >= 2:
        slope, _ = np.polyfit(np.array(lags[:run], float), np.log(np.abs(covs[:run])), 1)
        fit["theta"] = float(-slope)
    if run >= 1 and run < len(lags):
        # decay from the last significant lag to below the noise floor at the next lag
        gap = lags[run] - lags[run - 1]
        fit["theta_lower_bound"] = float(math.log(abs(covs[run - 1]) / (3 * ses[run])) / gap)
    summary = {"experiment": "mixing_decay", "system": system.name, "samples": M,
               "psi": psi, "phi": phi, "verdict": "NonMixing" if non_mixing else "Mixing",
               "significant_initial_run": run, **fit}
    if exact_line:
        ex = np.array([r[3] for r in rows])
        nz = np.abs(ex) > 0
        if nz.sum() >= 2:
            sl, _ = np.polyfit(np.array(lags, float)[nz], np.log(np.abs(ex[nz])), 1)
            summary["theta_exact_line"] = float(-sl)
        summary["max_abs_z_vs_exact"] = float(np.max(np.abs(covs - ex) / ses))
    return ExperimentResult("mixing_decay", ["lag", "cov", "stderr", "exact_cov"], rows,
                            summary, cfg, system.exactness.value)


# -------------------------------------------------------------------- harman

def harman_trace(schedule, nmax: int, pmax: int = 80):
    """Exact-oracle ratio trace for the doubling family C_{i,j}, 1 <= i <= j <= n.

    Numerator at n: sum over j1 < j2 <= n of j1 * cov(j2 - j1; r_{j1}, r_{j2})
    (only equal index gaps contribute, and for given j1 < j2 there are j1 such
    pairs).  Denominator: (sum_{j <= n} 2 j r_j)^2.  Gaps beyond ``pmax`` are
    dropped; each such term is below 2^(2 - pmax) r_{j2} in absolute value.
    Returns arrays S (sum j r_j), numerator, denominator for n = 0..nmax.
    """
    r = schedule.eval_array(np.arange(0, nmax + 1))
    contrib = np.zeros(nmax + 1)
    for p in range(1, min(pmax, nmax) + 1):
        j1 = np.arange(1, nmax + 1 - p)
        contrib[1 + p:] += j1 * oracles.harman_numerator_terms(j1, j1 + p, r[j1], r[j1 + p])
    num = np.cumsum(contrib)
    jr = np.arange(nmax + 1) * r
    jr[0] = 0.0
    S = np.cumsum(jr)
    den = (2 * S) ** 2
    return S, num, den


def _harman_checkpoints(nmax: int) -> list:
    pts = set(range(1, min(nmax, 64) + 1))
    x = 64.0
    while x <= nmax:
        pts.add(int(round(x)))
        x *= 2 ** 0.25
    pts.add(nmax)
    return sorted(p for p in pts if p <= nmax)


def harman_ratio_experiment(cfg: ExperimentConfig, threads=None) -> ExperimentResult:
    scheds = cfg.schedules()
    if len(scheds) != 1:
        raise ConfigError("harman experiment takes one schedule")
    s = scheds[0]
    rep = classify_sum_n_rn(s, horizon=1 << 12)
    if rep.label == "Converges":
        raise PreconditionError("harman ratio needs a divergent sum n r_n")
    nmax = cfg.get("nmax", 1 << 14)
    S, num, den = harman_trace(s, nmax)
    cps = _harman_checkpoints(nmax)
    rows = [(n, n * (n + 1) // 2, S[n], num[n], den[n], num[n] / den[n]) for n in cps]
    ratio = num / np.where(den > 0, den, np.nan)
    doubling = []
    for na in cps:
        target = 2 * S[na]
        nb = int(np.searchsorted(S, target))
        if nb <= nmax:
            doubling.append({"n_a": na, "n_b": nb, "S_a": S[na], "S_b": S[nb],
                             "ratio_a": ratio[na], "ratio_b": ratio[nb],
                             "decrease": 1 - ratio[nb] / ratio[na] if ratio[na] else None})
    summary = {"experiment": "harman", "schedule": s.name, "nmax": nmax,
               "ratio_first": ratio[1] if den[1] else None, "ratio_last": ratio[nmax],
               "max_ratio_times_S": float(np.nanmax(ratio[1:] * S[1:])),
               "doubling_pairs": doubling,
               "best_decrease": max((d["decrease"] for d in doubling if d["decrease"] is not None),
                                    default=None)}
    return ExperimentResult("harman", ["n", "k_n", "sum_j_rj", "numerator", "denominator", "ratio"],
                            rows, summary, cfg, Exactness.EXACT.value)


RUNNERS = {
    "exponent": exponent_experiment,
    "expectation": expectation_experiment,
    "dichotomy": dichotomy_experiment,
    "liminf": liminf_experiment,
    "rotation_mixed": rotation_mixed_experiment,
    "mixing_decay": mixing_decay_experiment,
    "harman": harman_ratio_experiment,
}


def run_experiment(cfg: ExperimentConfig | dict, threads: int | None = None) -> ExperimentResult:
    if isinstance(cfg, dict):
        cfg = ExperimentConfig.from_dict(cfg)
    return RUNNERS[cfg.experiment](cfg, threads)
