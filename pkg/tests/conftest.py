import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def norm2(a):
    return float(np.linalg.norm(a, 2))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
