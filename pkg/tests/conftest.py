"""Acceptance summary hook; shared helpers live in suite_helpers."""

from suite_helpers import ACCEPTANCE_RESULTS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, status, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{cid} {status} {detail}".rstrip())
