"""Shared pytest wiring: prints the acceptance-criterion summary lines."""

ACCEPTANCE_RESULTS: list[tuple[int, str, str]] = []


def record_criterion(number: int, status: str, description: str) -> None:
    ACCEPTANCE_RESULTS.append((number, status, description))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, description in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number} {status}  {description}")
