import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def verdict(request):
    """``verdict(criterion, ok, detail)`` records a PASS/FAIL line and asserts ``ok``."""
    lines = request.config.stash[_LINES_KEY]

    def record(criterion: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'}  {criterion}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        print(line)
        assert ok, line

    def report(criterion: str, detail: str):
        line = f"REPORT {criterion}  {detail}"
        lines.append(line)
        print(line)

    record.report = report
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
