import warnings

import numpy as np
import pytest

from nordvlasov.core import SimConfig, gaussian_bump, make_initial_data

ACCEPTANCE_LINES = []


def pytest_configure(config):
    warnings.filterwarnings("ignore", message=".*TBB.*")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_cfg():
    """Fast coupled configuration (tens of milliseconds per step)."""
    return SimConfig(x_min=-8.0, x_max=8.0, nx=128, t_final=0.5, n_particles=4000,
                     n_sample_x=250, n_sample_p=4)


@pytest.fixture
def bump_data():
    return gaussian_bump()


def grid_of(cfg):
    return cfg.grid
