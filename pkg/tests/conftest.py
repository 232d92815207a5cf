import pytest

_ACCEPTANCE: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): marks a test as an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and report.when == "call":
        _ACCEPTANCE[marker.kwargs.get("name", item.name)] = report.outcome
    elif marker and report.when == "setup" and report.skipped:
        _ACCEPTANCE[marker.kwargs.get("name", item.name)] = "skipped"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name, outcome in _ACCEPTANCE.items():
        terminalreporter.write_line(f"[{label.get(outcome, outcome.upper())}] {name}")
