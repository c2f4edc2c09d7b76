import numpy as np
import pytest

from hsflow.datum import datum_pw, datum_smooth, datum_stat

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["stat", "smooth", "pw"])
def fixture_name(request):
    return request.param


@pytest.fixture
def stat():
    return datum_stat(256)


@pytest.fixture
def smooth():
    return datum_smooth(256)


@pytest.fixture
def pw():
    return datum_pw(256)
