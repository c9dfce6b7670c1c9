import numpy as np
import pytest

from bubblegram import GridSpec, compute_bubblegram
from bubblegram.simkit import paper_single, simulate

# pass/fail lines recorded by the acceptance suite, printed at session end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(0.0, 0.2, 0.5e-3, 1.5e-3, 60, 40)


@pytest.fixture(scope="session")
def single_signal():
    sig, truth = simulate(paper_single(0))
    return sig, truth


@pytest.fixture(scope="session")
def paper_bubblegram(single_signal):
    sig, _ = single_signal
    return compute_bubblegram(sig, GridSpec.paper())
