import numpy as np
import pytest

from sweatpp.core import Window, make_regular_quadrature

#: lines reported by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def camera_window():
    return Window(2592.0, 1944.0)


@pytest.fixture
def small_window():
    return Window(600.0, 450.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def camera_quad():
    return make_regular_quadrature(Window(2592.0, 1944.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
