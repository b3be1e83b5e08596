import pytest

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    out = yield
    rep = out.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    key = (mark.args[0], mark.args[1])
    if rep.failed or (rep.when == "call" and rep.skipped):
        _outcomes[key] = "FAIL" if rep.failed else "SKIP"
    elif rep.when == "call":
        _outcomes.setdefault(key, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), status in sorted(_outcomes.items()):
        terminalreporter.write_line(f"criterion {n} {status}: {title}")
