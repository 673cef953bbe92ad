import contextlib

import pytest

_LINES = {}


class _Checks:
    def __init__(self):
        self.failed = []
        self.notes = []

    def check(self, ok, what):
        ok = bool(ok)
        (self.notes if ok else self.failed).append(what)
        return ok


@pytest.fixture
def criterion():
    """Context manager that records a PASS/FAIL line for one acceptance criterion.

    Every ``c.check(...)`` inside the block is evaluated; the test fails after
    the block if any check failed or the block raised.
    """
    @contextlib.contextmanager
    def run(number, title):
        c = _Checks()
        error = None
        try:
            yield c
        except Exception as exc:  # reported as FAIL, then re-raised
            error = exc
        ok = error is None and not c.failed
        detail = "; ".join(c.failed) if c.failed else "; ".join(c.notes)
        if error is not None:
            detail = f"{type(error).__name__}: {error}"
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
        _LINES[number] = line
        print(line)
        if error is not None:
            raise error
        assert ok, line

    return run


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
