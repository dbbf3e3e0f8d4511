import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record an acceptance result, print it, then assert it."""

    def record(number, title, ok, detail, elapsed=None, limit=None):
        timed_ok = limit is None or elapsed is None or elapsed < limit
        passed = bool(ok) and timed_ok
        timing = "" if elapsed is None else f" [{elapsed:.2f} s" + (f" < {limit:g} s" if limit else "") + "]"
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {title}: {detail}{timing}"
        _ACCEPTANCE[number] = line
        print(line)
        assert ok, line
        assert timed_ok, f"criterion {number} exceeded its runtime budget: {elapsed:.2f} s >= {limit} s"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
