"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from hardy_eigen import ProblemSpec

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def unit_p2_l12() -> ProblemSpec:
    return ProblemSpec.build(2, 2, level=12)


@pytest.fixture(scope="session")
def unit_p2_l10() -> ProblemSpec:
    return ProblemSpec.build(2, 2, level=10)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
