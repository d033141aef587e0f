import pytest

# nodeid -> {"number", "detail", "passed"}
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.fixture
def criterion(request):
    """Callable that attaches a one-line detail to the acceptance summary."""
    def record(detail: str):
        _CRITERIA.setdefault(request.node.nodeid, {})["detail"] = detail
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    entry = _CRITERIA.setdefault(item.nodeid, {})
    entry["number"] = marker.args[0]
    entry["passed"] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for entry in sorted(_CRITERIA.values(), key=lambda e: e.get("number", 0)):
        verdict = "PASS" if entry.get("passed") else "FAIL"
        detail = entry.get("detail", "no result recorded")
        terminalreporter.write_line(f"{verdict} criterion {entry.get('number', '?')}: {detail}")
