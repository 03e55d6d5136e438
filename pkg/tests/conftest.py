import numpy as np
import pytest

from jointtherm.dataset import simulate_trajectories


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def short_runs():
    """Six 60 s synthetic runs, cheap enough for end-to-end tests."""
    return simulate_trajectories(count=6, seed=3, duration=60.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
