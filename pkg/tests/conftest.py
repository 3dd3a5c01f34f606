import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rel_err(actual, expected):
    """Max abs error normalised by the largest oracle magnitude."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(np.abs(expected).max(), 1e-12)
    return float(np.abs(actual - expected).max() / scale)


ACCEPTANCE = []


def record_criterion(number, name, passed, detail=""):
    """Remember one acceptance verdict; all of them print in the terminal summary."""
    ACCEPTANCE.append((number, name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {name}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
