import numpy as np
import pytest

from bridgekit.fileio import load_fixture
from support import ACCEPTANCE_LINES


@pytest.fixture(scope="session")
def nine():
    return load_fixture("nine-node")


@pytest.fixture(scope="session")
def nine_l79():
    return load_fixture("nine-node-l79")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
