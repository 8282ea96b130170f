import numpy as np
import pytest

from heraldbell.planner import ExperimentParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def baseline():
    return ExperimentParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20260114)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
