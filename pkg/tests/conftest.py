import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, note=''): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if hasattr(report, "wasxfail"):
            status = "XFAIL" if report.skipped else "XPASS"
        else:
            status = report.outcome.upper()
        _outcomes.setdefault(marker.args[0], []).append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        results = _outcomes[n]
        if any(s in ("FAILED", "XPASS") for _, s in results):
            verdict = "FAIL"
        elif any(s == "XFAIL" for _, s in results):
            verdict = "FAIL (expected; see " + ", ".join(
                name for name, s in results if s == "XFAIL") + ")"
        else:
            verdict = "PASS"
        detail = "; ".join(f"{name} {s.lower()}" for name, s in results)
        tr.write_line(f"criterion {n:2d}: {verdict}  [{detail}]")
