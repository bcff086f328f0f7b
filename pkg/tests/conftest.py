"""Shared pytest hooks.

Acceptance tests carry ``@pytest.mark.acceptance(k)``; after the run one
PASS/FAIL line per criterion is printed, with whatever the test recorded
through ``record_property("measured", ...)``.
"""

import pytest

_results: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    k = marker.args[0]
    entry = _results.setdefault(k, {"passed": True, "measured": [], "name": item.name})
    if report.failed or (report.when == "call" and report.skipped):
        entry["passed"] = False
    if report.when == "call":
        entry["measured"] += [str(v) for key, v in item.user_properties if key == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_results):
        r = _results[k]
        status = "PASS" if r["passed"] else "FAIL"
        detail = "; ".join(r["measured"])
        tr.write_line(f"criterion {k:2d}: {status}  {r['name']}" + (f"  [{detail}]" if detail else ""))
