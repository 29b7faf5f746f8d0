"""Shared pytest plumbing: the acceptance-criteria summary block.

Acceptance tests call record(); the collected lines are printed as a
dedicated section at the end of the run so each criterion shows one
explicit pass/fail line regardless of output capturing.
"""

_ACCEPTANCE = []


def record(num, ok, detail):
    _ACCEPTANCE.append((num, f"criterion {num}: "
                             f"{'PASS' if ok else 'FAIL'}  {detail}"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
