import contextlib

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """``with criterion(n, title):`` records PASS when the block completes and
    FAIL when it raises; the summary prints one line per criterion."""

    @contextlib.contextmanager
    def record(n, title):
        _CRITERIA[n] = (False, title)
        yield
        _CRITERIA[n] = (True, title)
        print(f"PASS criterion {n}: {title}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title = _CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}")
