"""Acceptance bookkeeping: one summary line per criterion at the end of the run."""

import pytest

_RESULTS = {}
_NOTES = {}


@pytest.fixture
def note(request):
    """Record a diagnostic shown next to the criterion's summary line."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        if marker is not None:
            _NOTES.setdefault(marker.args[0], []).append(text)
        print(text)

    return add


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    passed = call.excinfo is None
    _RESULTS[number] = (title, passed and _RESULTS.get(number, (title, True))[1])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}")
        for text in _NOTES.get(number, []):
            terminalreporter.write_line(f"             {text}")
