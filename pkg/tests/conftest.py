"""Collects acceptance verdicts and prints them after the run."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda t: int(t.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
