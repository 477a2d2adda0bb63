import mpmath
import numpy as np
import pytest

ACCEPTANCE_LINES = []


def exact_log_det_one_minus(entries, dps=60):
    """log det(1 - M) of the stored float matrix, with the LU done at dps digits."""
    n = entries.shape[0]
    with mpmath.workdps(dps):
        a = mpmath.eye(n) - mpmath.matrix(np.asarray(entries, dtype=float).tolist())
        return float(mpmath.log(mpmath.det(a)))


@pytest.fixture
def report():
    """Record one acceptance verdict line; printed in the terminal summary."""
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append((number, ok, detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda item: item[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
