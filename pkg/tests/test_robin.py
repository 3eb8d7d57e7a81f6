"""
Tests for the Robin half-line oscillator and the de Gennes function.
"""

import math

import pytest

from step_spectra.errors import ParameterError
from step_spectra.robin import (
    RobinParams,
    de_gennes,
    discrete_dlambda_dxi,
    dlambda_dgamma,
    dlambda_dxi,
    neumann_band,
    robin_eig,
    robin_grid,
    robin_system,
    robin_value,
    theta0,
    xi0,
)
from step_spectra.specdisc import Discretization, central_difference, eigs_smallest, quadrature, richardson
from tests.fixtures.test_data import FH_RTOL, THETA0, THETA0_WINDOW, XI0


def fd_xi(gamma, xi, j, disc):
    return central_difference(lambda x: robin_eig(RobinParams(gamma, x), j, disc).value, xi, 1e-4)


def fd_gamma(gamma, xi, j, disc):
    return central_difference(lambda g: robin_eig(RobinParams(g, xi), j, disc).value, gamma, 1e-4)


class TestRobinEig:
    """Tests for robin_eig."""

    def test_neumann_gaussian(self, coarse_disc):
        """Test λ(0, 0) = 1."""
        assert robin_value(0.0, 0.0, coarse_disc) == pytest.approx(1.0, abs=1e-4)

    def test_left_limit(self, coarse_disc):
        """Test λ(0, -6) ≈ 1."""
        assert robin_value(0.0, -6.0, coarse_disc) == pytest.approx(1.0, abs=1e-3)

    def test_increasing_in_gamma(self, coarse_disc):
        """Test λ(1, 0) > λ(0, 0)."""
        assert robin_value(1.0, 0.0, coarse_disc) > robin_value(0.0, 0.0, coarse_disc)

    def test_normalized_positive_trace(self, coarse_disc):
        """Test unit trapezoidal norm and u(0) > 0."""
        pair = robin_eig(RobinParams(0.5, -1.0), 1, coarse_disc)
        assert quadrature(pair.grid, pair.vector**2) == pytest.approx(1.0, abs=1e-10)
        assert pair.at_zero > 0

    @pytest.mark.parametrize("gamma,xi", [(-0.5, -1.0), (0.0, 0.0), (1.0, 0.5)])
    def test_simple_spectrum(self, coarse_disc, gamma, xi):
        """Test λ¹ < λ² < λ³."""
        system = robin_system(RobinParams(gamma, xi), coarse_disc)
        values = [p.value for p in eigs_smallest(system, k=3)]
        assert values[0] < values[1] < values[2]

    def test_excited_index(self, coarse_disc):
        """Test that j selects the j-th level."""
        first = robin_eig(RobinParams(0.0, 0.0), 1, coarse_disc).value
        second = robin_eig(RobinParams(0.0, 0.0), 2, coarse_disc).value
        assert second == pytest.approx(5.0, abs=1e-2)
        assert first < second

    def test_invalid_index(self, coarse_disc):
        """Test j ≥ 1."""
        with pytest.raises(ParameterError):
            robin_eig(RobinParams(0.0, 0.0), 0, coarse_disc)

    def test_invalid_params(self):
        """Test rejection of non-finite parameters."""
        with pytest.raises(ParameterError):
            RobinParams(float("nan"), 0.0)

    def test_grid_length(self):
        """Test the half-line box [0, |ξ| + 12]."""
        grid = robin_grid(-3.0, Discretization(delta=0.01))
        assert grid.lo == 0.0
        assert grid.hi == pytest.approx(15.0)


class TestFeynmanHellmann:
    """Tests for the derivative formulas."""

    @pytest.mark.parametrize("gamma,xi,j", [(0.0, -1.0, 1), (0.5, 0.0, 2), (0.0, -0.7, 1), (0.0, -0.7, 2)])
    def test_dxi(self, disc, gamma, xi, j):
        """Test (λ - ξ² + γ²)u(0)² against a centered difference."""
        params = RobinParams(gamma, xi)
        formula = dlambda_dxi(params, j, robin_eig(params, j, disc))
        fd = fd_xi(gamma, xi, j, disc)
        assert abs(formula - fd) <= FH_RTOL * (1.0 + abs(fd))

    @pytest.mark.parametrize("gamma,xi,j", [(0.0, 0.0, 1), (0.0, -0.7, 1), (0.0, -0.7, 2)])
    def test_dgamma(self, disc, gamma, xi, j):
        """Test u(0)² against a centered difference."""
        params = RobinParams(gamma, xi)
        formula = dlambda_dgamma(params, j, robin_eig(params, j, disc))
        assert formula > 0
        fd = fd_gamma(gamma, xi, j, disc)
        assert abs(formula - fd) <= FH_RTOL * (1.0 + abs(fd))

    def test_dgamma_exact_on_grid(self, coarse_disc):
        """Test that u(0)² is the exact γ-derivative of the discrete eigenvalue."""
        params = RobinParams(0.3, -0.52)
        formula = dlambda_dgamma(params, 1, robin_eig(params, 1, coarse_disc))
        assert formula == pytest.approx(fd_gamma(0.3, -0.52, 1, coarse_disc), abs=1e-7)

    def test_discrete_dxi_exact_on_grid(self, coarse_disc):
        """Test the quadrature derivative against a centered difference on the same grid."""
        params = RobinParams(0.3, -0.52)
        formula = discrete_dlambda_dxi(params, robin_eig(params, 1, coarse_disc))
        assert formula == pytest.approx(fd_xi(0.3, -0.52, 1, coarse_disc), abs=1e-7)


class TestDeGennes:
    """Tests for the de Gennes function."""

    def test_theta0(self, theta0_value):
        """Test Θ₀ ≈ 0.59 in (1/2, 1)."""
        assert THETA0_WINDOW[0] <= theta0_value <= THETA0_WINDOW[1]
        assert 0.5 < theta0_value < 1.0
        assert theta0_value == pytest.approx(THETA0, abs=5e-3)

    def test_xi0(self, disc, theta0_value):
        """Test ξ₀ ≈ -0.768 and ξ₀² ≈ Θ₀."""
        x = xi0(disc)
        assert x == pytest.approx(XI0, abs=5e-3)
        assert x**2 == pytest.approx(theta0_value, abs=1e-4)

    def test_minimizer_is_critical(self, disc):
        """Test dλ/dξ = 0 at ξ(0)."""
        point = de_gennes(0.0, disc)
        params = RobinParams(0.0, point.xi_min)
        assert abs(discrete_dlambda_dxi(params, robin_eig(params, 1, disc))) < 1e-8
        assert abs(dlambda_dxi(params, 1, robin_eig(params, 1, disc))) < 1e-3

    def test_increasing_in_gamma(self, coarse_disc):
        """Test Θ(-0.5) < Θ(0) < Θ(0.5)."""
        thetas = [de_gennes(g, coarse_disc).theta for g in (-0.5, 0.0, 0.5)]
        assert thetas[0] < thetas[1] < thetas[2]

    @pytest.mark.parametrize("gamma", [-1.0, -0.5, 0.5, 2.0])
    def test_window_and_identity(self, coarse_disc, gamma):
        """Test -γ² ≤ Θ(γ) < 1, ξ(γ) < 0, positive curvature and the minimizer identity."""
        point = de_gennes(gamma, coarse_disc)
        assert -gamma**2 <= point.theta < 1.0
        assert point.xi_min < 0
        assert point.curvature > 0
        assert abs(point.identity_residual) < 1e-3

    @pytest.mark.slow
    def test_identity_after_refinement(self):
        """Test |ξ(γ) + √(Θ(γ) + γ²)| ≤ 1e-6 after Richardson extrapolation."""
        disc = Discretization(delta=0.01)
        for gamma in (-0.5, 0.0, 0.5, 1.0):
            levels = [de_gennes(gamma, disc.refined(2**k)) for k in range(3)]
            deltas = [disc.delta / 2**k for k in range(3)]
            theta = richardson([p.theta for p in levels], deltas)
            xi_min = richardson([p.xi_min for p in levels], deltas)
            assert abs(xi_min + math.sqrt(theta + gamma**2)) <= 1e-6

    def test_to_dict(self, coarse_disc):
        """Test dictionary export."""
        data = de_gennes(0.0, coarse_disc).to_dict()
        assert set(data) >= {"gamma", "theta", "xi_min", "curvature", "identity_residual"}

    def test_cached_theta0(self, disc):
        """Test that Θ₀ is reused per discretization."""
        assert theta0(disc) == theta0(disc)

    def test_neumann_band(self, coarse_disc):
        """Test λᴺ(ξ) = λ(0, ξ)."""
        assert neumann_band(-0.5, coarse_disc).value == robin_value(0.0, -0.5, coarse_disc)
