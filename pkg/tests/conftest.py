"""Per-criterion pass/fail summary for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(n)`` are grouped by ``n``; a criterion
passes when every test in its group passes.  Values recorded with
``record_property`` are echoed next to the verdict.
"""
from collections import defaultdict

import pytest

_results = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    if call.when == "call" or (call.when == "setup" and report.outcome != "passed"):
        _results[m.args[0]].append((item.name, report.outcome, item.user_properties))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        runs = _results[n]
        failed = [name for name, outcome, _ in runs if outcome != "passed"]
        notes = "; ".join(f"{k}={v}" for _, _, props in runs for k, v in props)
        line = f"criterion {n}: {'FAIL' if failed else 'PASS'}"
        if failed:
            line += f" (failed: {', '.join(failed)})"
        if notes:
            line += f" [{notes}]"
        tr.write_line(line)
