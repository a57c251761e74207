from __future__ import annotations

import pytest

from implicit_ba import BACKEND

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_acceptance():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_report_header(config):
    return f"implicit_ba kernel backend: {BACKEND}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: s.split("]", 1)[0]):
        terminalreporter.write_line(line)
