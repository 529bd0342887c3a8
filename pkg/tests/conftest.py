import pytest

# criterion number -> [title, passed, first failure line]
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True, ""])
    if report.failed:
        crash = getattr(report.longrepr, "reprcrash", None)
        entry[1] = False
        entry[2] = entry[2] or (crash.message.splitlines()[0] if crash else "failed")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail[:110]}]"
        terminalreporter.write_line(line)
