import pytest

from elapsed.densities import builtin_density
from elapsed.model import builtin_model


def ex1_model():
    return builtin_model("sigmoid", (9, 3.5), 0.5)


def ex31_model():
    return builtin_model("clamped_linear", (1.6, 0.25, 1.0), 1.0)


def ex32_model():
    return builtin_model("rational_shift", (10, 0.5), 1.0)


def ex4_model():
    return builtin_model("double_gaussian", (8, 0.1, 8, 3), 0.2)


@pytest.fixture
def ex1():
    return ex1_model()


@pytest.fixture
def ex31():
    return ex31_model()


@pytest.fixture
def ex4():
    return ex4_model()


@pytest.fixture
def n0_ex1():
    return builtin_density("plateau_exp", [1.0])


ACCEPTANCE_LINES = {}


def record(criterion: int, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:2d}: {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
