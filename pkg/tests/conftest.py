import pytest

ACCEPTANCE: list[tuple[int, bool, str, float]] = []


@pytest.fixture
def record():
    """Register the outcome of one acceptance criterion for the terminal summary."""
    def _record(number: int, passed: bool, summary: str, seconds: float) -> None:
        ACCEPTANCE.append((number, bool(passed), summary, seconds))
        print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {summary} ({seconds:.2f} s)")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, summary, seconds in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {summary} ({seconds:.2f} s)")
