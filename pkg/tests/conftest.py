"""
Pytest fixtures for step-spectra tests.

Band minima and ground-state bundles are expensive, so they are built once
per session on the default discretization.
"""

import tempfile
from pathlib import Path

import pytest

from step_spectra.bandmin import minimize_band
from step_spectra.moments import ground_state_bundle
from step_spectra.robin import theta0
from step_spectra.specdisc import Discretization


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture(scope="session")
def disc():
    """Default discretization (δ = 0.005)."""
    return Discretization()


@pytest.fixture(scope="session")
def coarse_disc():
    """Coarser discretization for checks that only need a few digits."""
    return Discretization(delta=0.01)


@pytest.fixture(scope="session")
def theta0_value(disc):
    """Θ₀ on the default discretization."""
    return theta0(disc)


@pytest.fixture(scope="session")
def half_minimum(disc, theta0_value):
    """Band minimum for a = -0.5."""
    return minimize_band(-0.5, disc, theta0=theta0_value)


@pytest.fixture(scope="session")
def symmetric_minimum(disc, theta0_value):
    """Band minimum for a = -1."""
    return minimize_band(-1.0, disc, theta0=theta0_value)


@pytest.fixture(scope="session")
def half_bundle(disc, half_minimum):
    """Ground-state bundle for a = -0.5."""
    return ground_state_bundle(-0.5, disc, half_minimum)


@pytest.fixture(scope="session")
def symmetric_bundle(disc, symmetric_minimum):
    """Ground-state bundle for a = -1."""
    return ground_state_bundle(-1.0, disc, symmetric_minimum)
