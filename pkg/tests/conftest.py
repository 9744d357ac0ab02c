import pytest

ACCEPT_KEY = pytest.StashKey()


@pytest.fixture
def accept_line(request):
    """Record one pass/fail line for the acceptance summary block."""

    def rec(line: str):
        request.config.stash.setdefault(ACCEPT_KEY, []).append(line)
        print(line)

    return rec


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
