import numpy as np
import pytest

from qcldpc_cvqkd.experiment import FIXTURES
from qcldpc_cvqkd.qc_code import BaseMatrix, expand

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_code():
    return FIXTURES["toy"].code()


@pytest.fixture(scope="session")
def rate02_code():
    return FIXTURES["rate0.2"].code()


@pytest.fixture(scope="session")
def rate01_code():
    return FIXTURES["rate0.1"].code()


@pytest.fixture
def small_code():
    # 3 x 6 base, Z = 8: every block-row touches every other block-row's columns.
    shifts = np.array([[0, 3, -1, 5, 1, -1],
                       [2, -1, 7, 0, -1, 4],
                       [-1, 6, 1, -1, 3, 2]])
    return expand(BaseMatrix(shifts, 8))
