import numpy as np
import pytest

from cmaxwell.geometry import GridSpec, SpacetimeMetric

ACCEPTANCE_LINES = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    """Print and remember one acceptance verdict."""
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def flat():
    return SpacetimeMetric.minkowski()


@pytest.fixture
def grid16():
    return GridSpec.cube(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
