import pytest

# criterion number -> (passed, detail); filled in by test_acceptance.py
ACCEPTANCE: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (passed, detail)
    print(f"ACCEPTANCE {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:2d}. {'PASS' if passed else 'FAIL'}  {detail}")
