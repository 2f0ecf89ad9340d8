import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> (title, outcome, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[str, str, str]] = {}


@pytest.fixture
def acceptance():
    def record(number, title: str, outcome: str, detail: str = "") -> None:
        ACCEPTANCE[str(number)] = (title, outcome, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, outcome, detail = ACCEPTANCE[number]
        line = f"criterion {number}: {outcome:7s} {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
