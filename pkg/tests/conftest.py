import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            number, title = value
            _CRITERIA[number] = ("PASS" if report.passed else "FAIL", title)


@pytest.fixture(autouse=True)
def _record_criterion(request):
    marker = request.node.get_closest_marker("criterion")
    if marker is not None:
        request.node.user_properties.append(("criterion", tuple(marker.args)))
    yield


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")
