from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from restsens import BernoulliShift, ProbabilityVector

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def uniform_shift():
    return BernoulliShift(ProbabilityVector.uniform(2))


@pytest.fixture
def thirds_shift():
    return BernoulliShift(ProbabilityVector((Fraction(1, 3), Fraction(2, 3))))


@pytest.fixture
def two_sided_shift():
    return BernoulliShift(ProbabilityVector.uniform(2), two_sided=True)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
