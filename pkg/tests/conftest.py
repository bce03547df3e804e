import numpy as np
import pytest

from armopt.dynamics import ArmParams


@pytest.fixture
def arm():
    return ArmParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def shipped_runs():
    """One optimization per shipped scenario, shared across test modules.

    Maps name to ``(ScenarioResult, wall seconds)``.
    """
    import time

    from armopt.scenarios import builtin_scenarios, run_scenario

    runs = {}
    for sc in builtin_scenarios():
        start = time.perf_counter()
        res = run_scenario(sc)
        runs[sc.name] = (res, time.perf_counter() - start)
    return runs


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
