import numpy as np
import pytest

from vpsheath.core import SimulationConfig, make_initial_data
from vpsheath.harness import prepared_initial_data
from vpsheath.spectral import moment_table, project


def pytest_configure(config):
    config._criteria_lines = {}


def pytest_terminal_summary(terminalreporter, config):
    lines = config._criteria_lines
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])


@pytest.fixture(scope="session")
def cfg():
    return SimulationConfig()


@pytest.fixture(scope="session")
def moments(cfg):
    return moment_table(cfg.L, cfg.M)


@pytest.fixture(scope="session")
def homogeneous(cfg):
    return prepared_initial_data("homogeneous", cfg)


@pytest.fixture(scope="session")
def sigma(homogeneous):
    return homogeneous.profile


@pytest.fixture(scope="session")
def raw_sigma(cfg):
    return make_initial_data("homogeneous", cfg).profile


@pytest.fixture(scope="session")
def inflow(cfg, sigma):
    return project(sigma, cfg.M, cfg.L, cfg.quad_nodes)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
