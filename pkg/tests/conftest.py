import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    item = _items.get(report.nodeid)
    if item is None:
        return
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
    # several tests may share a criterion; any failure sticks
    if _criteria.get(num, (None, None))[1] != "FAIL":
        _criteria[num] = (title, outcome)


_items = {}


def pytest_collection_modifyitems(items):
    for item in items:
        _items[item.nodeid] = item


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        title, outcome = _criteria[num]
        terminalreporter.write_line(f"AC{num} {title}: {outcome}")


@pytest.fixture
def csv_bytes():
    def make(rows, header="date,close"):
        return (header + "\n" + "\n".join(rows) + "\n").encode()
    return make
