import pytest

from twofluidnet.model import example_config


@pytest.fixture
def ex1():
    return example_config(1, 50.0, 0.5)


@pytest.fixture
def ex2():
    return example_config(2, 30.0, 1.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
