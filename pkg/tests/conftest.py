import pytest
from hypothesis import HealthCheck, settings

from support import table2_schema, table2_server

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def t2_schema():
    return table2_schema()


@pytest.fixture(scope="session")
def t2_server(t2_schema):
    return table2_server(t2_schema)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
