import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running training experiments")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def line9():
    """9x9 grid with ground truth on row 4."""
    g = np.zeros((9, 9), dtype=bool)
    g[4, :] = True
    return g


def pytest_terminal_summary(terminalreporter):
    # acceptance criteria record one line each; show them even without -s
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[key])
