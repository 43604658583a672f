import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nlsd.acceptance import Reproduction
from nlsd.model import Grid, ModelParams
from nlsd.stationary import continue_branch

settings.register_profile("nlsd", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nlsd")

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def repro():
    """Shared runner so expensive experiments execute once per session."""
    return Reproduction()


@pytest.fixture(scope="session")
def branch_11():
    ks = np.round(np.arange(2, 61) * 0.01, 12)
    return continue_branch(ks, ModelParams(1.0, 1.0))


@pytest.fixture
def fine_grid():
    return Grid.symmetric(30.0, 0.01)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
