import numpy as np
import pytest

from feigmarkov.core import solve_feigenbaum
from feigmarkov.inverse import find_c


@pytest.fixture(scope="session")
def m():
    return solve_feigenbaum(2)


@pytest.fixture(scope="session")
def c(m):
    return find_c(m).c


@pytest.fixture
def rng():
    return np.random.default_rng(1)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS, summary_lines
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in summary_lines():
        terminalreporter.write_line(line)
