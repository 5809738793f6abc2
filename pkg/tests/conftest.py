import pytest

_ACCEPTANCE = {}


@pytest.fixture
def report(request):
    """Attach a one-line measured value to an acceptance test's summary line."""
    def _report(text):
        request.node.user_properties.append(("detail", str(text)))
    return _report


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    entry = _ACCEPTANCE.setdefault(name, {"outcome": "passed", "detail": []})
    if report.failed:
        entry["outcome"] = "failed"
    elif report.skipped and entry["outcome"] == "passed":
        entry["outcome"] = "skipped"
    for key, value in report.user_properties:
        if key == "detail" and value not in entry["detail"]:
            entry["detail"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[name]
        mark = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[entry["outcome"]]
        detail = "; ".join(entry["detail"])
        terminalreporter.write_line(f"[{mark}] {name}" + (f": {detail}" if detail else ""))
