import pytest

# acceptance tests append (criterion, passed, detail) here
ACCEPTANCE_RESULTS = []
DIAGNOSTICS = []


def record(criterion, passed, detail):
    ACCEPTANCE_RESULTS.append((criterion, bool(passed), detail))
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def note(label, detail):
    DIAGNOSTICS.append((label, detail))
    print(f"diagnostic {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for crit, ok, detail in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"criterion {crit:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
    if DIAGNOSTICS:
        terminalreporter.section("acceptance diagnostics (not criteria)")
        for label, detail in DIAGNOSTICS:
            terminalreporter.write_line(f"{label}: {detail}")
