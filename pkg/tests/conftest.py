"""Collects one summary line per acceptance check.

Acceptance tests call ``record_property("criterion", ...)`` and
``record_property("measured", ...)``; the lines are printed at the end
of the run whether the check passed or not.
"""

_results = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _results.append((props["criterion"], report.outcome.upper(), props.get("measured", "")))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for crit, outcome, measured in sorted(_results, key=lambda r: r[0]):
        verdict = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {crit}  {measured}")
