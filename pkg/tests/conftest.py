import numpy as np
import pytest

from osmprobe.problems import curved_advection, laplace_strip

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def laplace16():
    return laplace_strip(16)


@pytest.fixture(scope="session")
def laplace50():
    return laplace_strip(50)


@pytest.fixture(scope="session")
def curved_coarse():
    return curved_advection(n_h=30, nx=10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
