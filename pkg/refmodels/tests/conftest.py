"""Shared pytest plumbing: a visible pass/fail line per acceptance criterion."""

from contextlib import contextmanager

import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Context manager that records one PASS/FAIL summary line per criterion."""

    @contextmanager
    def _criterion(name: str):
        try:
            yield
        except BaseException:
            _ACCEPTANCE_LINES.append(f"FAIL  {name}")
            raise
        else:
            _ACCEPTANCE_LINES.append(f"PASS  {name}")

    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
