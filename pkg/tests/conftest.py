"""Collect acceptance-criterion outcomes and print one line per criterion."""

import pytest

_outcomes: dict[str, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): test decides one acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    name = marker.args[0]
    prev = _outcomes.get(name)
    ok = rep.passed and (prev is None or prev[0])
    _outcomes[name] = [ok, "; ".join(d for d in ((prev or [None, ""])[1], detail) if d)]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in _outcomes.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
