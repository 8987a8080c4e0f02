import numpy as np
import pytest

from chirp2d import single_chirp, synthesize, two_chirps


@pytest.fixture(scope="session")
def case1_25():
    """Noiseless one-component benchmark grid, 25 x 25."""
    return synthesize(single_chirp(), 25, 25)


@pytest.fixture(scope="session")
def case1_50():
    return synthesize(single_chirp(), 50, 50)


@pytest.fixture(scope="session")
def case2_50():
    return synthesize(two_chirps(), 50, 50)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one PASS/FAIL line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
