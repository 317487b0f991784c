import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(number, ok, detail)``.

    Lines are printed immediately and repeated in the terminal summary so
    they survive output capture.
    """

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
        _VERDICTS[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[number])
