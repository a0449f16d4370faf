"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_OUTCOMES: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        # parametrised criteria pass only if every case passes
        _, prev, spent = _OUTCOMES.get(number, (title, "PASS", 0.0))
        if prev != "PASS":
            status = prev
        _OUTCOMES[number] = (title, status, spent + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, status, duration = _OUTCOMES[number]
        terminalreporter.write_line(f"criterion {number:>2} {status}  {title} ({duration:.1f}s)")
    passed = sum(s == "PASS" for _, s, _ in _OUTCOMES.values())
    terminalreporter.write_line(f"{passed}/{len(_OUTCOMES)} criteria pass")
