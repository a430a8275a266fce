import time

import pytest
from hypothesis import settings

from minkowski_tasks.catalog import run_catalog

settings.register_profile("default", deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def catalog_run():
    """Every catalog scenario with all of its checks, run once per session."""
    t0 = time.perf_counter()
    reports = run_catalog("all")
    return reports, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
