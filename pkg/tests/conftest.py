import numpy as np
import pytest

from multistep_mle.models import get_model


@pytest.fixture(scope="session")
def quartic():
    return get_model("quartic", [0.0], [2.0])


@pytest.fixture(scope="session")
def ou():
    return get_model("ou")


@pytest.fixture(scope="session")
def quartic2d():
    return get_model("quartic2d")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
