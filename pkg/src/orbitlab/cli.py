"""orbitlab command line.

Exit codes: 0 success, 2 configuration error, 3 numerical-precondition failure.
Every run writes ``<subcommand>.manifest.json`` next to its data files.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
from importlib import metadata

from . import checks, engine, experiments, measures, oracles, schedules, svgplot
from .circlepoint import CirclePoint
from .dynamics import MeasureSpec, SystemSpec, random_orbit
from .errors import ConfigError, NumericalError

MANIFEST_VERSION = 1

def _versions() -> dict:
    out = {"python": platform.python_version()}
    for dist in ("artifact", "numpy", "scipy", "numba", "jsonschema"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out

def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()

class Outputs:
    def __init__(self, out_dir: str):
        self.dir = out_dir
        self.files: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name: str, text: str) -> str:
        path = os.path.join(self.dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.files.append(path)
        return path

    def manifest(self, sub: str, argv: list, config: dict, seed) -> str:
        hashes = {os.path.basename(p): _sha256(p) for p in self.files}
        content = hashlib.sha256("".join(f"{k}:{v}\n" for k, v in sorted(hashes.items())).encode())
        doc = {"manifest_version": MANIFEST_VERSION, "subcommand": sub, "argv": argv,
               "config": config, "seed": seed, "versions": _versions(), "outputs": hashes,
               "content_hash": content.hexdigest()}
        path = os.path.join(self.dir, f"{sub}.manifest.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

def _csv_text(header: list, rows, comments=()) -> str:
    lines = [f"# {c}\n" for c in comments]
    lines.append(",".join(header) + "\n")
    for row in rows:
        lines.append(",".join(experiments.fmt(v) for v in row) + "\n")
    return "".join(lines)

def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    return experiments.default_threads()

def _qmax(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 1 or v != int(v):
        raise argparse.ArgumentTypeError("qmax must be a positive integer")
    return int(v)

def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None

# ------------------------------------------------------------ subcommands

def cmd_orbit_min(args, out: Outputs) -> dict:
    s1 = SystemSpec.parse(args.system1, args.metric)
    s2 = SystemSpec.parse(args.system2, args.metric) if args.system2 else None
    sched = schedules.parse(args.schedule) if args.schedule else None
    rows = []
    for t in range(args.trials):
        rng = experiments.trial_rng(args.seed, t)
        o1, _ = random_orbit(s1, rng, args.n)
        if s2 is None:
            prof = engine.single_orbit_profile(o1, args.n, sched, args.checkpoints, args.radius_scale)
        else:
            o2, _ = random_orbit(s2, rng, args.n)
            prof = engine.closeness_profile(o1, o2, args.n, sched, args.checkpoints, args.radius_scale)
        rows.extend(engine.profile_rows(prof, t, sched))
    ex = s1.exactness.value + ("" if s2 is None else "+" + s2.exactness.value)
    text = _csv_text(["trial_id", "n", "M_n", "r_n", "hit_flag"], rows,
                     [f"systems={s1.name}{'' if s2 is None else ',' + s2.name}", f"exactness={ex}"])
    out.write("orbit_min.csv", text)
    sys.stdout.write(text)
    return {"system1": s1.name, "system2": s2.name if s2 else None, "n": args.n,
            "trials": args.trials, "schedule": sched.name if sched else None}

def cmd_dimension(args, out: Outputs) -> dict:
    mu = MeasureSpec.parse(args.measure)
    grid = measures.dyadic_grid(args.jmin, args.jmax)
    ci = measures.correlation_integral(mu, grid, args.method, args.metric, samples=args.samples,
                                       seed=args.seed)
    out.write("correlation_integral.csv", _csv_text(["r", "value", "stderr", "method"], ci.rows()))
    est = measures.correlation_dimension(ci)
    res = {"measure": args.measure, "method": ci.method.value, "metric": ci.metric.value,
           "slope": est.slope, "intercept": est.intercept, "residual": est.residual,
           "r_range": list(est.r_range), "points": est.n_points}
    text = json.dumps(res, indent=2) + "\n"
    out.write("dimension.json", text)
    sys.stdout.write(text)
    return {"measure": args.measure, "method": args.method, "jmin": args.jmin, "jmax": args.jmax,
            "samples": args.samples}

def cmd_schedule_check(args, out: Outputs) -> dict:
    sched = schedules.parse(args.schedule)
    if args.condition == "sum-n-rn":
        rep = schedules.classify_sum_n_rn(sched, horizon=args.horizon)
        doc = rep.to_json()
        label = rep.label
    elif args.condition == "liminf":
        rep = schedules.classify_liminf_condition(sched)
        doc = rep.to_json()
        label = rep.label
    else:
        ev = schedules.cauchy_condensation_equivalent(sched, horizon=args.horizon)
        doc = {"condition": "condensation", "horizons": ev.horizons, "full_sums": ev.full_sums,
               "condensed_sums": ev.condensed_sums, "ratio": ev.ratio, "alarm": ev.alarm}
        label = "Alarm" if ev.alarm else "Consistent"
    out.write("schedule_check.json", json.dumps(experiments._jsonable(doc), indent=2) + "\n")
    print(label)
    return {"schedule": sched.name, "condition": args.condition, "horizon": args.horizon}

def _alpha(text: str):
    if text in oracles.SYMBOLIC:
        return text
    if text.startswith("hex:"):
        return CirclePoint.from_hex(text[4:])
    try:
        return CirclePoint.from_float(float(text))
    except ValueError:
        raise ConfigError(f"bad angle {text!r}") from None

def cmd_diophantine(args, out: Outputs) -> dict:
    alpha = _alpha(args.alpha)
    prof = oracles.continued_fraction(alpha, qmax=args.qmax)
    form = oracles.DiophantineForm(oracles.FormKind(args.form), eps=args.eps, sigma=args.sigma)
    rep = oracles.diophantine_condition(prof, form, args.qmax)
    doc = {"profile": prof.to_json(), "report": rep.to_json()}
    text = json.dumps(experiments._jsonable(doc), indent=2) + "\n"
    out.write("diophantine.json", text)
    sys.stdout.write(text)
    return {"alpha": args.alpha, "form": args.form, "eps": args.eps, "sigma": args.sigma,
            "qmax": args.qmax}

def cmd_oracle_check(args, out: Outputs) -> dict:
    names = list(checks.CHECKS) if args.check == "all" else [args.check]
    results = {}
    for i, name in enumerate(names):
        rng = experiments.trial_rng(args.seed, i)
        results[name] = checks.CHECKS[name](rng)
    text = json.dumps(experiments._jsonable(results), indent=2, sort_keys=True) + "\n"
    out.write("oracle_check.json", text)
    for name, r in results.items():
        print(f"{name}: {'ok' if r['ok'] else 'MISMATCH'}")
    failed = [n for n, r in results.items() if not r["ok"]]
    if failed:
        raise NumericalError(f"oracle mismatch in {', '.join(failed)}")
    return {"check": args.check}

def cmd_experiment(args, out: Outputs) -> dict:
    cfg = experiments.ExperimentConfig.load(args.config)
    res = experiments.run_experiment(cfg, _threads(args))
    name = cfg.experiment
    out.write(f"{name}.csv", res.csv_text())
    out.write(f"{name}_summary.json", res.summary_json())
    if args.plot:
        out.write(f"{name}.svg", plot_result(res))
    print(f"{name}: {len(res.rows)} rows, config_sha256={cfg.sha256}")
    return cfg.raw

def plot_result(res: experiments.ExperimentResult) -> str:
    s = res.summary
    if res.name == "harman":
        xs = [r[2] for r in res.rows]
        return svgplot.line_plot({"ratio": (xs, [r[5] for r in res.rows])}, "ratio trace",
                                 "sum j r_j", "ratio", logx=True)
    if res.name == "exponent":
        ts = [r[0] for r in res.rows]
        return svgplot.line_plot({"slope": (ts, [r[1] for r in res.rows])}, "per-trial slope",
                                 "trial", "slope")
    if res.name in ("dichotomy", "rotation_mixed"):
        scheds = s["schedules"] if "schedules" in s else s["windows"]["schedules"]
        series = {d["schedule"]: (d["window_k"], d["window_hit_fraction"]) for d in scheds}
        return svgplot.line_plot(series, "window-hit fraction", "k", "fraction")
    if res.name == "liminf":
        series = {d["schedule"]: (d["kmax"], d["all_checkpoint_hit_fraction"]) for d in s["schedules"]}
        return svgplot.line_plot(series, "all-checkpoint hit fraction", "kmax", "fraction")
    if res.name == "mixing_decay":
        lags = [r[0] for r in res.rows]
        series = {"|cov|": (lags, [abs(r[1]) for r in res.rows])}
        if res.rows and res.rows[0][3] is not None:
            series["|exact|"] = (lags, [abs(r[3]) for r in res.rows])
        return svgplot.line_plot(series, "covariance decay", "lag", "|cov|", logy=True)
    cells = s["cells"]
    return svgplot.line_plot({"mean": ([c["n"] for c in cells], [c["mean"] for c in cells]),
                              "target": ([c["n"] for c in cells], [c["target"] for c in cells])},
                             "mean S_n", "n", "S_n", logx=True, logy=True)

def cmd_plot(args, out: Outputs) -> dict:
    """Plot a profile CSV (log-log M_n) written by orbit-min."""
    series: dict = {}
    try:
        with open(args.input, newline="") as fh:
            rows = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in rows:
                if "M_n" not in row:
                    raise ConfigError("plot input must be an orbit-min profile CSV")
                xs, ys = series.setdefault(f"trial {row['trial_id']}", ([], []))
                xs.append(float(row["n"]))
                ys.append(float(row["M_n"]))
    except OSError as e:
        raise ConfigError(str(e)) from None
    out.write(args.name, svgplot.line_plot(series, "minimal orbit distance", "n", "M_n",
                                           logx=True, logy=True))
    return {"input": args.input}

# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(2)

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default="orbitlab_out", help="directory for data files and manifest")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: ORBITLAB_THREADS or CPU count)")

    p = _Parser(prog="orbitlab", description="Orbit closeness experiments.", allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("orbit-min", parents=[common], allow_abbrev=False, help="minimal orbit distance profile")
    s.add_argument("--system1", required=True, help="kary:k, rotation:<angle>, logistic4 or gauss")
    s.add_argument("--system2", default=None, help="second system; omit for the single-orbit profile")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, required=True, help="horizon N")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--schedule", default=None, help="radius schedule for hit flags")
    s.add_argument("--radius-scale", type=float, default=1.0)
    s.add_argument("--metric", choices=["circle", "interval"], default=None)
    s.add_argument("--checkpoints", type=_int_list, default=None, help="comma-separated n values")
    s.set_defaults(func=cmd_orbit_min)

    s = sub.add_parser("dimension", parents=[common], allow_abbrev=False, help="correlation integral and dimension fit")
    s.add_argument("--measure", required=True, choices=["lebesgue", "gauss", "logistic4"])
    s.add_argument("--method", default="quadrature", choices=["analytic", "paircount", "quadrature"])
    s.add_argument("--metric", choices=["circle", "interval"], default=None)
    s.add_argument("--jmin", type=int, default=4)
    s.add_argument("--jmax", type=int, default=14)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_dimension)

    s = sub.add_parser("schedule-check", parents=[common], allow_abbrev=False, help="classify a radius schedule")
    s.add_argument("--schedule", required=True)
    s.add_argument("--condition", required=True, choices=["sum-n-rn", "liminf", "condensation"])
    s.add_argument("--horizon", type=int, default=1 << 20)
    s.set_defaults(func=cmd_schedule_check)

    s = sub.add_parser("diophantine", parents=[common], allow_abbrev=False, help="continued fraction and margin report")
    s.add_argument("--alpha", required=True, help="golden, sqrt2-1, hex:<32 digits> or a float")
    s.add_argument("--form", required=True, choices=[f.value for f in oracles.FormKind])
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--sigma", type=float, default=0.0)
    s.add_argument("--qmax", type=_qmax, default=10 ** 6)
    s.set_defaults(func=cmd_diophantine)

    s = sub.add_parser("oracle-check", parents=[common], allow_abbrev=False, help="engine and oracle cross-checks")
    s.add_argument("--check", default="all", choices=["all", *checks.CHECKS])
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_oracle_check)

    s = sub.add_parser("experiment", parents=[common], allow_abbrev=False, help="run a configured experiment")
    s.add_argument("--config", required=True, help="experiment config JSON or a run manifest")
    s.add_argument("--plot", action="store_true", help="also write an SVG plot")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("plot", parents=[common], allow_abbrev=False, help="SVG plot of an orbit-min profile CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--name", default="profile.svg", help="output file name inside --out-dir")
    s.set_defaults(func=cmd_plot)
    return p

def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        sys.stderr.write("orbitlab: error: --threads must be >= 1\n")
        return 2
    try:
        out = Outputs(args.out_dir)
        config = args.func(args, out)
        out.manifest(args.command, argv, config, getattr(args, "seed", None)
                     if args.command != "experiment" else config.get("base_seed"))
    except ConfigError as e:
        sys.stderr.write(f"orbitlab: config error: {e}\n")
        return 2
    except NumericalError as e:
        sys.stderr.write(f"orbitlab: numerical error: {type(e).__name__}: {e}\n")
        return 3
    except (ValueError, OSError) as e:
        sys.stderr.write(f"orbitlab: config error: {e}\n")
        return 2
    return 0

if __name__ == "__main__":
    sys.exit(main())
