import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture()
def record():
    """Record the one-line outcome of an acceptance criterion."""

    def _record(number: int, passed: bool | None, detail: str) -> bool | None:
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        _ACCEPTANCE[number] = f"criterion {number:>2}: {status}  {detail}"
        print(_ACCEPTANCE[number])
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
