import os

import pytest
from hypothesis import HealthCheck, settings

from xtalk_pqc.device import CouplingMap, default_device, uniform_device

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def device():
    return default_device()


def line_device(n: int, **kw):
    return uniform_device(CouplingMap(n, frozenset((i, i + 1) for i in range(n - 1))), **kw)


@pytest.fixture
def line4():
    return line_device(4)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
