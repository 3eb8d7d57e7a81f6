"""
Tests for the moments of the ground state and the approximate eigenpair.
"""

import numpy as np
import pytest

from step_spectra.errors import ParameterError
from step_spectra.moments import (
    build_approx_eigenpair,
    half_line_orthogonality,
    moment,
    moment_closed,
    moment_identities,
    moment_summary,
    refine_moments,
    regularized_resolvent,
    residual_scaling,
)
from step_spectra.specdisc import inner_product
from tests.fixtures.test_data import REFINED_TOL


def resolvent_residual(bundle, u, v):
    """max |(𝔥 - β)u - v| over the interior nodes, relative to max |v|."""
    system = bundle.system
    x = system.from_grid(u)
    lhs = system.matvec(x) - bundle.beta * x
    projected = v - inner_product(bundle.grid, v, bundle.phi) * bundle.phi
    return float(np.max(np.abs(lhs - system.from_grid(projected))) / np.max(np.abs(v)))


class TestGroundStateBundle:
    """Tests for ground_state_bundle."""

    def test_minimum_data(self, half_bundle, half_minimum):
        """Test that the bundle carries the band minimum."""
        assert half_bundle.zeta == half_minimum.zeta
        assert half_bundle.beta == pytest.approx(half_minimum.beta, abs=1e-12)
        assert half_bundle.phi0 > 0
        assert half_bundle.dphi0 < 0

    def test_sigma(self, half_bundle):
        """Test σ = a left of the jump and 1 from the jump on."""
        tau = half_bundle.tau
        assert np.all(half_bundle.sigma[tau < 0] == -0.5)
        assert np.all(half_bundle.sigma[tau >= 0] == 1.0)

    def test_to_dict(self, half_bundle):
        """Test dictionary export."""
        data = half_bundle.to_dict()
        assert data["a"] == -0.5
        assert "grid" in data


class TestMoments:
    """Tests for moment and moment_closed."""

    def test_first_moment_small(self, half_bundle):
        """Test M₁ ≈ 0 on the default grid."""
        assert abs(moment(half_bundle, 1)) < 1e-3

    def test_third_moment_negative(self, half_bundle):
        """Test M₃ < 0 for a = -0.5."""
        assert moment(half_bundle, 3) < 0
        assert moment_closed(half_bundle, 3) < 0

    def test_symmetric_step_moments(self, symmetric_bundle):
        """Test M₁ = M₃ = 0 at a = -1."""
        assert abs(moment(symmetric_bundle, 1)) < REFINED_TOL
        assert abs(moment(symmetric_bundle, 3)) < REFINED_TOL

    @pytest.mark.parametrize("n", [2, 3])
    def test_closed_forms(self, half_bundle, n):
        """Test quadrature against the boundary-trace closed forms."""
        assert moment(half_bundle, n) == pytest.approx(moment_closed(half_bundle, n), abs=1e-3)

    def test_first_closed_form(self, half_bundle):
        """Test M₁ = 0 in closed form."""
        assert moment_closed(half_bundle, 1) == 0.0

    def test_invalid_orders(self, half_bundle):
        """Test rejection of n = 0 and of closed forms beyond n = 3."""
        with pytest.raises(ParameterError):
            moment(half_bundle, 0)
        with pytest.raises(ParameterError):
            moment_closed(half_bundle, 4)

    def test_identities(self, half_bundle):
        """Test M₁ and M₃ against their trace identities."""
        identities = moment_identities(half_bundle)
        assert identities.m1 == pytest.approx(identities.m1_trace, abs=1e-3)
        assert identities.m3 == pytest.approx(identities.m3_trace, abs=1e-3)
        assert set(identities.to_dict()) == {"m1", "m1_trace", "m3", "m3_trace"}

    def test_half_line_orthogonality(self, half_bundle):
        """Test that both one-sided integrals of (ζ + στ)φ² vanish."""
        left, right = half_line_orthogonality(half_bundle)
        assert abs(left) < 1e-3
        assert abs(right) < 1e-3
        assert abs(left + right) < 1e-8

    def test_summary_keys(self, half_bundle):
        """Test the summary used by the refinement."""
        assert set(moment_summary(half_bundle)) == {"m1", "m2", "m3", "m2_closed", "m3_closed"}

    @pytest.mark.slow
    @pytest.mark.parametrize("a", [-0.25, -0.5, -1.0])
    def test_refined_first_moment(self, a):
        """Test M₁ = 0 within 1e-6 after refinement."""
        refined = refine_moments(a)
        assert abs(refined.extrapolated["m1"]) <= REFINED_TOL
        if a == -1.0:
            assert abs(refined.extrapolated["m3"]) <= REFINED_TOL
        else:
            assert refined.extrapolated["m3"] < 0


class TestRegularizedResolvent:
    """Tests for regularized_resolvent."""

    def test_ground_state_maps_to_zero(self, half_bundle):
        """Test that φ is sent to 0."""
        assert np.all(regularized_resolvent(half_bundle, half_bundle.phi) == 0.0)

    def test_shifted_ground_state(self, half_bundle):
        """Test the solve for v₁ = (ζ + στ)φ."""
        v = half_bundle.shifted * half_bundle.phi
        u = regularized_resolvent(half_bundle, v)
        assert abs(inner_product(half_bundle.grid, u, half_bundle.phi)) < 1e-10
        assert resolvent_residual(half_bundle, u, v) < 1e-8

    def test_double_application(self, half_bundle):
        """Test that applying the resolvent twice stays consistent."""
        v = half_bundle.shifted * half_bundle.phi
        once = regularized_resolvent(half_bundle, v)
        twice = regularized_resolvent(half_bundle, once)
        assert resolvent_residual(half_bundle, twice, once) < 1e-8


class TestApproxEigenpair:
    """Tests for build_approx_eigenpair."""

    def test_coefficients(self, half_bundle, half_minimum):
        """Test c₀ = β, c₁ = 0 and c₂ = ½μ″(ζ)."""
        pair = build_approx_eigenpair(half_bundle, kappa=1.0)
        assert pair.c0 == half_bundle.beta
        assert pair.c1 == 0.0
        assert pair.c2 == pytest.approx(0.5 * half_minimum.mu2, rel=1e-2)

    def test_correctors_orthogonal(self, half_bundle):
        """Test ⟨uⱼ, u₀⟩ = 0 for the three correctors."""
        pair = build_approx_eigenpair(half_bundle, kappa=1.0)
        for value in pair.corrector_inner_products():
            assert abs(value) < 1e-9

    def test_curvature_coefficient(self, half_bundle):
        """Test c₃ = 𝔨M₃."""
        m3 = moment(half_bundle, 3)
        pair = build_approx_eigenpair(half_bundle, kappa=-1.0, m3=m3)
        assert pair.c3 == pytest.approx(-m3)
        assert pair.c3 > 0

    def test_zero_curvature(self, half_bundle):
        """Test u₃ = 0 and c₃ = 0 for 𝔨 = 0."""
        pair = build_approx_eigenpair(half_bundle, kappa=0.0)
        assert pair.c3 == 0.0
        assert not np.any(pair.u3)

    def test_lambda_app(self, half_bundle):
        """Test λ at ξ = ζ and h = 0."""
        pair = build_approx_eigenpair(half_bundle, kappa=1.0)
        assert pair.lambda_app(half_bundle.zeta, 0.0) == pair.c0
        assert pair.lambda_app(half_bundle.zeta + 0.1, 0.0) == pytest.approx(pair.c0 + 0.01 * pair.c2)
        assert np.array_equal(pair.f_app(half_bundle.zeta, 0.0), pair.u0)

    def test_to_dict(self, half_bundle):
        """Test dictionary export."""
        data = build_approx_eigenpair(half_bundle, kappa=1.0).to_dict()
        assert set(data) == {"kappa", "zeta", "c0", "c1", "c2", "c3", "v3_inner"}


class TestResidualScaling:
    """Tests for residual_scaling."""

    @pytest.fixture(scope="class")
    def pair(self, half_bundle):
        return build_approx_eigenpair(half_bundle, kappa=1.0)

    def test_kappa_mismatch(self, pair, half_bundle):
        """Test that κ must match the pair."""
        with pytest.raises(ParameterError):
            residual_scaling(pair, half_bundle, kappa=-1.0)

    def test_invalid_h(self, pair, half_bundle):
        """Test rejection of h outside [0, 0.1]."""
        with pytest.raises(ParameterError):
            residual_scaling(pair, half_bundle, kappa=1.0, h_values=(0.5,))

    def test_invalid_offset(self, pair, half_bundle):
        """Test rejection of a zero offset."""
        with pytest.raises(ParameterError):
            residual_scaling(pair, half_bundle, kappa=1.0, xi_offsets=(0.0, 0.01))

    @pytest.mark.slow
    def test_exponents(self, pair, half_bundle):
        """Test exponent 1 in h at ξ = ζ and exponent 3 in the offset."""
        result = residual_scaling(pair, half_bundle, kappa=1.0)
        assert result.slope_h >= 0.95
        assert result.slope_offset >= 2.8
        assert all(r <= 3.0 for r in result.mixed_ratios)
        frame = result.to_frame()
        assert set(frame["regime"]) == {"h", "offset", "anchor", "mixed"}
        assert (frame.loc[frame["regime"] == "offset", "h"] == 0.0).all()


def commutator_gap(bundle, p, dp, d3p):
    """
    Apply 𝔥 - β to v = 2pφ' - p'φ and compare with
    (p''' - 4((ζ + στ)² - β)p' - 4σ(ζ + στ)p)φ away from the jump and the ends.
    """
    tau = bundle.tau
    dphi = np.gradient(bundle.phi, bundle.grid.delta)
    v = 2.0 * p(tau) * dphi - dp(tau) * bundle.phi
    system = bundle.system
    x = system.from_grid(v)
    applied = system.to_grid(system.matvec(x) - bundle.beta * x)
    expected = (
        d3p(tau)
        - 4.0 * (bundle.shifted**2 - bundle.beta) * dp(tau)
        - 4.0 * bundle.sigma * bundle.shifted * p(tau)
    ) * bundle.phi
    mask = (np.abs(tau) >= 0.25) & (np.abs(tau) <= 5.0)
    return float(np.max(np.abs(applied[mask] - expected[mask])) / np.max(np.abs(expected[mask])))


class TestCommutatorIdentity:
    """Tests for the operator identity behind the moment formulas."""

    def test_linear_weight(self, half_bundle):
        """Test p(τ) = τ."""
        gap = commutator_gap(half_bundle, lambda t: t, np.ones_like, np.zeros_like)
        assert gap < 1e-3

    def test_quadratic_weight(self, symmetric_bundle):
        """Test p(τ) = τ² on the symmetric step."""
        gap = commutator_gap(symmetric_bundle, lambda t: t**2, lambda t: 2.0 * t, np.zeros_like)
        assert gap < 1e-3
