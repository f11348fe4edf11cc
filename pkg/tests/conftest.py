import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("mtereg", deadline=None, max_examples=60)
settings.load_profile("mtereg")


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile the numba kernel once so per-test timings are not skewed
    from mtereg import WeightedLassoProblem, solve_weighted_lasso
    X = np.eye(3)
    solve_weighted_lasso(WeightedLassoProblem(X, np.ones(3), None, 0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    """Store and print the one-line verdict for an acceptance criterion."""
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
