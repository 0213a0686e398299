import time

import pytest

_LINES = []


@pytest.fixture
def criterion(request):
    """Time a check and record one PASS/FAIL line for the terminal summary."""

    class Recorder:
        def __init__(self):
            self.start = time.perf_counter()

        def report(self, number, title, passed, detail, limit=None, setup_time=0.0):
            elapsed = time.perf_counter() - self.start + setup_time
            timely = limit is None or elapsed < limit
            ok = passed and timely
            budget = f" (limit {limit:g} s)" if limit is not None else ""
            line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}: {detail} [{elapsed:.1f} s{budget}]"
            _LINES.append(line)
            print(line)
            assert passed, line
            assert timely, line

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
