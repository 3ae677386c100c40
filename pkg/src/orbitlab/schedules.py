"""Radius schedules r_n and checkable versions of the series conditions on them."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotMonotone


class RadiusSchedule:
    monotone: bool = False

    def eval(self, n) -> float:
        raise NotImplementedError

    def eval_array(self, n) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, n):
        return self.eval(n)

    def check_monotone(self, horizon: int, chunk: int = 1 << 22) -> bool:
        """True iff r_n >= r_{n+1} for 3 <= n < horizon."""
        last = None
        for a in range(3, horizon + 1, chunk):
            r = self.eval_array(np.arange(a, min(a + chunk, horizon + 1)))
            if last is not None and r[0] > last:
                return False
            if np.any(np.diff(r) > 0):
                return False
            last = r[-1]
        return True


@dataclass(frozen=True)
class PowerLog(RadiusSchedule):
    """r_n = c (log n)^a (log log n)^bb / n^b, with r_1 = r_2 = r_3."""
    c: float = 1.0
    a: float = 0.0
    b: float = 2.0
    bb: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError("schedule constant must be positive")

    @property
    def name(self) -> str:
        return f"powerlog:{self.c!r},{self.a!r},{self.bb!r},{self.b!r}"

    def eval(self, n) -> float:
        """
        >>> round(PowerLog(1, -1, 2, 0).eval(math.e ** 2), 6)
        0.009158
        """
        n = max(float(n), 3.0)
        L = math.log(n)
        v = self.c / n ** self.b
        if self.a:
            v *= L ** self.a
        if self.bb:
            v *= math.log(L) ** self.bb
        return v

    def eval_array(self, n) -> np.ndarray:
        n = np.maximum(np.asarray(n, dtype=float), 3.0)
        L = np.log(n)
        v = self.c / n ** self.b
        if self.a:
            v = v * L ** self.a
        if self.bb:
            v = v * np.log(L) ** self.bb
        return v


class CustomSchedule(RadiusSchedule):
    """A finite table n -> r_n; indices below the first entry use the first value."""

    def __init__(self, table: dict, name: str = "custom"):
        if not table:
            raise ConfigError("empty schedule table")
        self.table = {int(k): float(v) for k, v in table.items()}
        if any(v <= 0 for v in self.table.values()):
            raise ConfigError("radii must be positive")
        self.n_max = max(self.table)
        arr = np.full(self.n_max + 1, np.nan)
        for k, v in self.table.items():
            arr[k] = v
        first = min(self.table)
        arr[:first] = arr[first]
        # forward-fill gaps
        for i in range(first + 1, self.n_max + 1):
            if math.isnan(arr[i]):
                arr[i] = arr[i - 1]
        self._arr = arr
        self._name = name

    @property
    def name(self) -> str:
        return self._name

    @classmethod
    def from_csv(cls, path: str) -> "CustomSchedule":
        table = {}
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    table[int(float(row[0]))] = float(row[1])
                except (ValueError, IndexError):
                    if table:
                        raise ConfigError(f"bad schedule row {row!r}") from None
        return cls(table, name=f"file:{path}")

    def eval(self, n) -> float:
        n = int(n)
        if n > self.n_max:
            raise ConfigError(f"schedule table ends at n = {self.n_max}")
        return float(self._arr[max(n, 0)])

    def eval_array(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        if n.size and n.max() > self.n_max:
            raise ConfigError(f"schedule table ends at n = {self.n_max}")
        return self._arr[np.maximum(n, 0)]


def parse(spec: str) -> RadiusSchedule:
    """``powerlog:c,a,bb,b``, ``file:<path>`` or a built-in family name."""
    spec = spec.strip()
    if spec in BUILTIN:
        return BUILTIN[spec]
    if spec.startswith("powerlog:"):
        try:
            c, a, bb, b = (float(v) for v in spec[len("powerlog:"):].split(","))
        except ValueError:
            raise ConfigError(f"bad powerlog schedule {spec!r}") from None
        return PowerLog(c=c, a=a, b=b, bb=bb)
    if spec.startswith("file:"):
        try:
            return CustomSchedule.from_csv(spec[len("file:"):])
        except OSError as e:
            raise ConfigError(str(e)) from None
    raise ConfigError(f"unknown schedule {spec!r}")


# named families used in tests and experiments
BUILTIN = {
    "inv_n2_log": PowerLog(1, -1, 2, 0),          # 1/(n^2 log n)
    "inv_n2_log2": PowerLog(1, -2, 2, 0),         # 1/(n^2 (log n)^2)
    "inv_n2_log3": PowerLog(1, -3, 2, 0),         # 1/(n^2 (log n)^3)
    "inv_n2": PowerLog(1, 0, 2, 0),               # 1/n^2
    "inv_n3": PowerLog(1, 0, 3, 0),               # 1/n^3
    "log_loglog15_n2": PowerLog(1, 1, 2, 1.5),    # log n (loglog n)^1.5 / n^2
    "log_loglog2_n2": PowerLog(1, 1, 2, 2.0),     # log n (loglog n)^2 / n^2
}


class Verdict(enum.Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    UNDETERMINED = "Undetermined"


@dataclass
class ConditionReport:
    condition: str
    verdict: Verdict
    evidence: dict = field(default_factory=dict)
    label: str = ""

    def to_json(self) -> dict:
        return {"condition": self.condition, "verdict": self.verdict.value,
                "label": self.label, "evidence": self.evidence}


def _series_converges(power: float, log_pow: float, loglog_pow: float) -> bool:
    """Convergence of sum n^-power (log n)^log_pow (loglog n)^loglog_pow."""
    if power != 1:
        return power > 1
    if log_pow != -1:
        return log_pow < -1
    return loglog_pow < -1


def _dyadic_horizons(horizon: int) -> list:
    out, h = [], 8
    while h <= horizon:
        out.append(h)
        h *= 2
    return out


def partial_sums(term, horizon: int, checkpoints, start: int = 3, chunk: int = 1 << 22) -> list:
    """Partial sums sum_{start <= n <= h} term(n) at the requested h (vectorised, chunked)."""
    checkpoints = sorted(checkpoints)
    out, total, ci = [], 0.0, 0
    a = start
    while a <= horizon and ci < len(checkpoints):
        b = min(a + chunk - 1, horizon)
        while ci < len(checkpoints) and checkpoints[ci] <= b:
            h = checkpoints[ci]
            if h >= a:
                total_h = total + float(np.sum(term(np.arange(a, h + 1, dtype=np.float64))))
            else:
                total_h = total
            out.append(total_h)
            ci += 1
        total += float(np.sum(term(np.arange(a, b + 1, dtype=np.float64))))
        a = b + 1
    while ci < len(checkpoints):
        out.append(total)
        ci += 1
    return out


def sum_n_rn_terms(schedule: RadiusSchedule):
    return lambda n: n * schedule.eval_array(n)


def liminf_terms(schedule: RadiusSchedule):
    """k -> 1 / (2^{2k} r_{2^k})."""
    def term(k):
        k = np.asarray(k, dtype=float)
        n = np.exp2(k)
        return 1.0 / (n * n * schedule.eval_array(n))
    return term


def classify_sum_n_rn(schedule: RadiusSchedule, horizon: int = 1 << 20) -> ConditionReport:
    """Convergence of sum n r_n."""
    hs = _dyadic_horizons(horizon)
    if isinstance(schedule, CustomSchedule):
        hs = [h for h in hs if h <= schedule.n_max] or [schedule.n_max]
    sums = partial_sums(sum_n_rn_terms(schedule), hs[-1], hs)
    evidence = {"horizons": hs, "partial_sums": sums}
    if isinstance(schedule, PowerLog):
        conv = _series_converges(schedule.b - 1, schedule.a, schedule.bb)
        return ConditionReport("sum-n-rn", Verdict.HOLDS if conv else Verdict.FAILS, evidence,
                               "Converges" if conv else "Diverges")
    return ConditionReport("sum-n-rn", Verdict.UNDETERMINED, evidence, "Undetermined")


def classify_liminf_condition(schedule: RadiusSchedule, kmax: int = 40) -> ConditionReport:
    """Convergence of sum_k 1 / (2^{2k} r_{2^k}), k >= 2."""
    if isinstance(schedule, CustomSchedule):
        kmax = min(kmax, int(math.log2(schedule.n_max)))
    ks = list(range(2, kmax + 1))
    terms = liminf_terms(schedule)(np.array(ks, dtype=float))
    evidence = {"k": ks, "partial_sums": np.cumsum(terms).tolist()}
    if isinstance(schedule, PowerLog):
        # terms ~ 2^{k(b-2)} / (k^a (log k)^bb)
        if schedule.b != 2:
            conv = schedule.b < 2
        else:
            conv = _series_converges(1.0, -schedule.a, -schedule.bb)
        return ConditionReport("liminf", Verdict.HOLDS if conv else Verdict.FAILS, evidence,
                               "Converges" if conv else "Diverges")
    return ConditionReport("liminf", Verdict.UNDETERMINED, evidence, "Undetermined")


@dataclass
class CondensationEvidence:
    horizons: list
    full_sums: list
    condensed_sums: list
    alarm: bool
    ratio: float


def cauchy_condensation_equivalent(schedule: RadiusSchedule, horizon: int = 1 << 27,
                                   base: int = 2, chunk: int = 1 << 22) -> CondensationEvidence:
    """Partial sums of c_n = 1/(n^3 r_n) and of sum_k a^k c_{a^k}.

    Raises NotMonotone if c_n increases for some 3 <= n <= horizon.  The alarm
    is raised when the two traces end more than a factor 10 apart.
    """
    def c(n):
        return 1.0 / (n ** 3 * schedule.eval_array(n))

    prev = None
    for a in range(3, horizon + 1, chunk):
        v = c(np.arange(a, min(a + chunk, horizon + 1), dtype=np.float64))
        seq = v if prev is None else np.concatenate(([prev], v))
        if np.any(np.diff(seq) > 1e-12 * np.abs(seq[1:])):
            i = int(np.argmax(np.diff(seq) > 1e-12 * np.abs(seq[1:])))
            raise NotMonotone(f"c_n = 1/(n^3 r_n) increases near n = {a + i - (prev is not None)}")
        prev = v[-1]

    hs = []
    k = 2
    while base ** k <= horizon:
        hs.append(base ** k)
        k += 1
    full = partial_sums(c, horizon, hs)
    ks = np.arange(2, 2 + len(hs), dtype=float)
    pts = np.power(float(base), ks)
    condensed = np.cumsum(pts * c(pts)).tolist()
    ratio = condensed[-1] / full[-1] if full[-1] > 0 else float("inf")
    return CondensationEvidence(hs, full, condensed, not (0.1 <= ratio <= 10.0), ratio)


def two_system_conditions(schedule: RadiusSchedule, ci_self_1, ci_self_2, ci_cross,
                          eps: float, horizon: int = 1 << 20, constant: float | None = None,
                          n_min: int = 16):
    """Ratio traces for the two liminf conditions on a pair of measures.

    First ratio:  cross(r_n) / ((log n)^3 (loglog n)^{1+eps} / n^2), should stay
    bounded below.
    Second ratio: max_i sqrt(self_i(r_n)) / cross(r_n) divided by
    n / ((log n)^2 (loglog n)^{1+eps}), should stay bounded above.
    Each callback maps a radius to the corresponding integral.  A verdict is
    returned only when ``constant`` is given: the first condition holds if its
    ratio is >= 1/constant at every dyadic n in range, the second if its ratio
    is <= constant.
    """
    ns, lower, upper = [], [], []
    n = n_min
    while n <= horizon:
        r = schedule.eval(n)
        L = math.log(n)
        LL = math.log(L)
        cross = ci_cross(r)
        lower.append(cross / (L ** 3 * LL ** (1 + eps) / n ** 2))
        s = max(math.sqrt(ci_self_1(r)), math.sqrt(ci_self_2(r)))
        upper.append((s / cross) / (n / (L ** 2 * LL ** (1 + eps))))
        ns.append(n)
        n *= 2
    reports = []
    for cid, trace, ok in (("lower-bound", lower, lambda v: v >= 1.0 / constant),
                           ("ratio-bound", upper, lambda v: v <= constant)):
        ev = {"n": ns, "ratio": trace, "trend": trace[-1] / trace[0] if trace[0] else float("inf")}
        if constant is None:
            verdict = Verdict.UNDETERMINED
        else:
            verdict = Verdict.HOLDS if all(ok(v) for v in trace) else Verdict.FAILS
        reports.append(ConditionReport(cid, verdict, ev, verdict.value))
    return tuple(reports)


theorem3_conditions = two_system_conditions
