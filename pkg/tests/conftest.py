import pytest

from valuectx.fixtures import load_fixture

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def mutrec():
    return load_fixture("mutrec")


@pytest.fixture
def twoclass():
    return load_fixture("twoclass")


@pytest.fixture
def poly():
    return load_fixture("poly")


@pytest.fixture
def default_site():
    return load_fixture("default_site")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
