import numpy as np
import pytest

from equatorflow import catalog
from equatorflow.operator import Grid


@pytest.fixture
def small_grid():
    return Grid(11.0, 101)


@pytest.fixture
def linear():
    return catalog.linear()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SMALL = dict(grid={"m": 151}, sweep={"xi_min": -5.0, "xi_max": 5.0, "delta_xi": 0.1, "E_window": [0.05, 5.0]})


@pytest.fixture(scope="session")
def small_config():
    from equatorflow.config import sweep_config

    return sweep_config("linear", alpha=[0.5, 1.5], **SMALL)


@pytest.fixture(scope="session")
def small_result(small_config):
    from equatorflow.sweep import run

    return run(small_config)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.VERDICTS):
            terminalreporter.write_line(line)
