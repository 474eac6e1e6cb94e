import numpy as np
import pytest

from p2eig.grid import Grid

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def unit_grid():
    return Grid(1, (0.0, 1.0), 256)


@pytest.fixture(scope="session")
def grid128():
    return Grid(1, (0.0, 1.0), 128)


@pytest.fixture(scope="session")
def small_grid():
    return Grid(1, (0.0, 1.0), 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
