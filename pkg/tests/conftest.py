import pytest

_ACCEPTANCE: list[tuple[int, bool, str]] = []


@pytest.fixture
def report():
    """Record one acceptance line; it is printed in the terminal summary."""
    def _report(number: int, passed: bool, detail: str):
        _ACCEPTANCE.append((number, bool(passed), detail))
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}")
