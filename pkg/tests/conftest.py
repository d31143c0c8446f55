"""Shared pytest plumbing: collects the acceptance verdicts for the summary."""

import pytest

_VERDICTS = []


class AcceptanceLog:
    """Records one PASS/FAIL line per acceptance criterion."""

    def __call__(self, number, title, passed, detail):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        _VERDICTS.append((number, line))
        print(line)
        return passed


@pytest.fixture
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
