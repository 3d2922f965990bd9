from __future__ import annotations

import numpy as np
import pytest
from loguru import logger

from src.dicke_model import PhysicalParams, build_hamiltonian, initial_state
from src.dynamics import evolve, make_propagator
from src.entanglement import entanglement_trajectory
from src.homodyne import readout_input


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running oracle / readout studies")


@pytest.fixture(autouse=True)
def _quiet_logs():
    logger.remove()
    yield
    logger.remove()


@pytest.fixture
def fig2_params() -> PhysicalParams:
    return PhysicalParams(omega=300.0, omega0=300.0, N1=10_000, N2=10_000)


@pytest.fixture
def fig2_hamiltonian(fig2_params):
    return build_hamiltonian(fig2_params)


@pytest.fixture
def fig2_grid() -> np.ndarray:
    return np.linspace(0.0, 0.1, 2001)


@pytest.fixture
def fig2_series(fig2_params, fig2_hamiltonian, fig2_grid):
    return entanglement_trajectory(fig2_hamiltonian, initial_state(fig2_params), fig2_grid, fig2_params)


@pytest.fixture
def first_peak_state(fig2_params, fig2_hamiltonian, fig2_series):
    """Two-ensemble state (dimensionless quadratures) at the first ln N maximum for omega = 300 g."""
    t_star, _ = fig2_series.first_peak()
    full = evolve(initial_state(fig2_params), make_propagator(fig2_hamiltonian, t_star))
    return readout_input(full, fig2_params)
