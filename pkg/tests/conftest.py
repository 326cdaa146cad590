"""Shared test plumbing: collects acceptance-criterion verdict lines and
prints them in the terminal summary so every run shows one pass/fail line per
criterion regardless of output capturing."""

ACCEPTANCE_LINES = []


def record_criterion(number, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    line = f"[criterion {number:>2}] {name}: {status}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
