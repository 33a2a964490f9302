from __future__ import annotations

import pytest

from cavitygate.hamiltonian import default_params
from cavitygate.hilbert import SystemLayout

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def layout54() -> SystemLayout:
    """Two work qutrits sharing one cavity: 3^3 x 2 = 54 states."""
    return SystemLayout(2, 1, 1)


@pytest.fixture(scope="session")
def params54():
    return default_params(2, cavity_count=1)


@pytest.fixture(scope="session")
def params3():
    return default_params(3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
