import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# Filled by tests/test_acceptance.py; one (criterion, verdict, detail) line each.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
