_acceptance_lines = []


def record_acceptance(name: str, passed: bool, detail: str = ""):
    line = f"[ACCEPTANCE] {name}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    _acceptance_lines.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
