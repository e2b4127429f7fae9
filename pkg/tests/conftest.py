import pytest

from polydet.geometry import make_region

SQUARE = [[(0, 0), (1, 0), (1, 1), (0, 1)]]
L_SHAPE = [[(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]]
HOLED = [[(0, 0), (6, 0), (6, 6), (0, 6)], [(2, 2), (4, 2), (4, 4), (2, 4)]]


@pytest.fixture
def square():
    return make_region(SQUARE)


@pytest.fixture
def l_shape():
    return make_region(L_SHAPE)


@pytest.fixture
def holed():
    return make_region(HOLED)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
