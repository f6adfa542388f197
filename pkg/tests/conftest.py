import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scmadec import reference_system

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref():
    return reference_system()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# One line per acceptance criterion, collected by tests/test_acceptance.py and
# repeated at the end of the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
