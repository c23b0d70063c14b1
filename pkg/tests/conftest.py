import pytest

from design_forge.graph import Graph

FANO = [(0, 1, 3), (1, 2, 4), (2, 3, 5), (3, 4, 6), (0, 4, 5), (1, 5, 6), (0, 2, 6)]

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fano():
    return list(FANO)


@pytest.fixture
def k7():
    return Graph.complete(7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
