import os

import pytest
from hypothesis import HealthCheck, settings

from distcover import from_rows

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion -> (ok, detail), filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"{criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def worked_example():
    """min x1 + x2  s.t.  0.5 x1 + 3 x2 >= 5, x2 <= 1, both integer."""
    return from_rows([{0: 0.5, 1: 3.0}], [5.0], [1.0, 1.0], upper_bounds=[None, 1.0], integer_vars=[0, 1])


def two_row_instance(second_demand):
    """min x1 + x2 + x3  s.t.  x1 + x2 >= 1, x1 + x3 >= second_demand."""
    return from_rows([{0: 1.0, 1: 1.0}, {0: 1.0, 2: 1.0}], [1.0, second_demand], [1.0, 1.0, 1.0])


@pytest.fixture
def tight_pair():
    return two_row_instance(5.0)


@pytest.fixture
def loose_pair():
    return two_row_instance(0.0)
