import numpy as np
import pytest

# acceptance lines collected by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = {}


def record(criterion: int, passed: bool, text: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {text}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def separated_delays(rng, L, min_sep=0.02, lo=0.0, hi=1.0):
    """L sorted delays in [lo, hi) with pairwise (circular) separation >= min_sep."""
    while True:
        t = np.sort(rng.uniform(lo, hi, L))
        gaps = np.diff(np.concatenate([t, [t[0] + 1.0]]))
        if L == 1 or gaps.min() >= min_sep:
            return t
