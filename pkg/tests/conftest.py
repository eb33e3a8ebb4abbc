import functools

import pytest

from patchpoly.fit import fit
from patchpoly.io import synth


@functools.lru_cache(maxsize=None)
def default_fit(shape: str):
    """Default-config fit of a 64x64 synthetic shape with k=5, s=8 (cached per session)."""
    y = synth(shape, 64, 64)
    return y, fit(y, 5, 8)


@pytest.fixture(scope="session")
def shape_fit():
    return default_fit


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
