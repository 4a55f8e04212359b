import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line and fail the test if the criterion does not hold."""

    def record(number, name, ok, detail):
        line = f"[criterion {number}] {'PASS' if ok else 'FAIL'} {name}: {detail}"
        _VERDICTS.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
