import _support


def pytest_terminal_summary(terminalreporter):
    if not _support.ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_support.ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
