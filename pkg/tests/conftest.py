from fractions import Fraction

import numpy as np
import pytest

from orbitlab.circlepoint import BitStreamPoint
from orbitlab.dynamics import OrbitStream, SystemSpec, random_orbit
from orbitlab import engine


def binary_digits(x: Fraction, n: int) -> str:
    """First n binary digits of x in [0, 1)."""
    out = []
    for _ in range(n):
        x *= 2
        out.append("1" if x >= 1 else "0")
        x -= int(x)
    return "".join(out)


def doubling_orbit(x: Fraction, horizon: int) -> OrbitStream:
    bits = binary_digits(Fraction(x), horizon + 200)
    return OrbitStream(SystemSpec.parse("kary:2"), BitStreamPoint.from_string(bits), horizon)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so per-test timings measure work, not JIT."""
    rng = np.random.default_rng(0)
    for name in ("kary:2", "rotation:golden", "logistic4", "gauss"):
        s = SystemSpec.parse(name)
        a, _ = random_orbit(s, rng, 64)
        b, _ = random_orbit(s, rng, 64)
        engine.min_distance_trace(a, b, 64)
        engine.min_distance_trace(a, None, 64)
        engine.count_s(a, b, 64, 0.01)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
