import json
from fractions import Fraction
from pathlib import Path

import pytest
from gmpy2 import mpq
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lbmfd.ring import LaurentPoly

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ORACLES = Path(__file__).parent / "oracles"


def rationals(lo=-3, hi=3, max_den=12):
    return st.builds(lambda n, d: mpq(n, d), st.integers(lo * max_den, hi * max_den),
                     st.integers(1, max_den))


def laurent_polys(dim=1, max_terms=6, span=3):
    exps = st.tuples(*[st.integers(-span, span)] * dim)
    return st.dictionaries(exps, rationals(), max_size=max_terms).map(lambda t: LaurentPoly(dim, t))


def q(x):
    """Exact rational from an int, a string "p/r" or a Fraction."""
    f = Fraction(x)
    return mpq(f.numerator, f.denominator)


def lp_from_json(entry, dim):
    return LaurentPoly(dim, {tuple(int(v) for v in k.split(",")): q(c) for k, c in entry.items()})


@pytest.fixture(scope="session")
def derived():
    return json.loads((ORACLES / "derived.json").read_text())


# one line per acceptance criterion, repeated in the terminal summary
CRITERIA_LINES: list = []


def report_criterion(number, ok, detail, seconds):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} ({seconds:.2f} s) {detail}"
    CRITERIA_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
