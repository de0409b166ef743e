"""Collects one summary line per acceptance criterion."""
import pytest

_LINES = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        if rep.skipped and not detail:
            detail = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
        _LINES.append((mark.args[0], item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, status, detail in sorted(_LINES, key=lambda t: (t[0], t[1])):
        terminalreporter.write_line(f"criterion {n} [{name}]: {status}  {detail}".rstrip())
