def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdict lines recorded via ``record_property``."""
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            for key, value in getattr(rep, "user_properties", ()):
                if key == "acceptance" and getattr(rep, "when", "call") == "call":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0].split("-")[1])):
            terminalreporter.write_line(line)
