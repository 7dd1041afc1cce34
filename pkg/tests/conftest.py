_ACCEPTANCE_LINES = []


def record_criterion(label: str, ok: bool, desc: str):
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'} - {desc}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
