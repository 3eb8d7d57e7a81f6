"""
Tests for the band minimization and the step constant.
"""

import pytest

from step_spectra.bandmin import (
    bounds_table,
    critical_identity_check,
    minimize_band,
    refine_minimum,
    step_constant,
    trial_state_bound,
)
from step_spectra.errors import NonAttainmentError, ParameterError
from step_spectra.specdisc import ScanBracket
from step_spectra.stepband import StepParams, band_point
from tests.fixtures.test_data import ORDER_WINDOW, REFINED_TOL, THETA0, XI0


class TestMinimizeBand:
    """Tests for minimize_band."""

    def test_symmetric_step(self, symmetric_minimum, theta0_value):
        """Test ζ₋₁ ≈ -√Θ₀, β₋₁ = Θ₀ and φ'(0) = 0."""
        m = symmetric_minimum
        assert m.zeta == pytest.approx(XI0, abs=5e-3)
        assert m.beta == pytest.approx(THETA0, abs=5e-3)
        assert abs(m.beta - theta0_value) <= REFINED_TOL
        assert abs(m.gamma_min) < 1e-4
        assert m.passed

    def test_half_step_bounds(self, half_minimum, theta0_value):
        """Test 0.5Θ₀ < β₋₀.₅ < 0.5 and β < Θ₀."""
        m = half_minimum
        assert 0.295 < m.beta < 0.5
        assert m.beta < theta0_value
        assert m.zeta < 0
        assert m.passed

    def test_curvature_matches_closed_form(self, half_minimum):
        """Test μ″(ζ) against 2(1/a - 1)ζφ(0)²."""
        m = half_minimum
        assert m.mu2 > 0
        assert m.mu2 == pytest.approx(m.mu2_closed, rel=1e-2)

    def test_negative_trace_derivative(self, coarse_disc):
        """Test φ'(0) < 0 at a = -0.25."""
        m = minimize_band(-0.25, coarse_disc)
        assert m.gamma_min < 0
        assert m.dphi0 < 0
        assert m.checks["gamma_negative"]

    def test_spectral_gap(self, half_minimum):
        """Test that the second band lies above β."""
        assert half_minimum.mu_second > half_minimum.beta

    @pytest.mark.parametrize("a", [0.25, 0.5, 0.9])
    def test_not_attained(self, coarse_disc, a):
        """Test the non-attainment error for a ∈ (0, 1)."""
        with pytest.raises(NonAttainmentError) as exc:
            minimize_band(a, coarse_disc)
        assert exc.value.a == a
        assert "does not achieve a minimum" in str(exc.value)

    def test_invalid_a(self, coarse_disc):
        """Test rejection of a outside [-1, 1)."""
        with pytest.raises(ParameterError):
            minimize_band(-2.0, coarse_disc)

    def test_reuses_bracket(self, coarse_disc, half_minimum):
        """Test minimization inside a supplied bracket."""
        m = minimize_band(-0.5, coarse_disc, bracket=half_minimum.bracket)
        assert m.bracket is half_minimum.bracket
        assert m.zeta == pytest.approx(half_minimum.zeta, abs=1e-3)

    def test_unique_bracket_flag(self, coarse_disc, half_minimum):
        """Test that the uniqueness flag follows the dips of the scan trace."""
        assert half_minimum.bracket.local_minima == 1
        assert half_minimum.checks["unique_bracket"]
        b = half_minimum.bracket
        two_dips = [(b.lo - 2.0, 1.0), (b.lo - 1.0, 0.0), (b.lo, 1.0), (b.mid, 0.0), (b.hi, 1.0)]
        m = minimize_band(-0.5, coarse_disc, bracket=ScanBracket(b.lo, b.mid, b.hi, two_dips))
        assert not m.checks["unique_bracket"]
        assert m.to_dict()["bracket_minima"] == 2

    def test_to_dict(self, half_minimum):
        """Test dictionary export with nested checks."""
        data = half_minimum.to_dict()
        assert data["a"] == -0.5
        assert isinstance(data["checks"], dict)
        assert data["bracket_lo"] < data["zeta"] < data["bracket_hi"]


class TestCriticalIdentity:
    """Tests for the critical-point identity."""

    def test_half_step_residual(self, disc, half_minimum):
        """Test (β - ζ²)φ(0)² + φ'(0)² ≈ 0 at a = -0.5."""
        point = band_point(StepParams(-0.5), half_minimum.zeta, disc, second=False)
        assert abs(critical_identity_check(half_minimum, point)) < 1e-3

    def test_symmetric_residual(self, disc, symmetric_minimum):
        """Test that the residual reduces to (Θ₀ - ζ²)φ(0)² at a = -1."""
        m = symmetric_minimum
        point = band_point(StepParams(-1.0), m.zeta, disc, second=False)
        assert abs(critical_identity_check(m, point)) < 1e-3

    def test_rejects_other_point(self, disc, half_minimum):
        """Test that the identity is evaluated at the minimizer only."""
        point = band_point(StepParams(-0.5), half_minimum.zeta + 0.1, disc, second=False)
        with pytest.raises(ParameterError):
            critical_identity_check(half_minimum, point)

    @pytest.mark.slow
    def test_refined_residual(self):
        """Test |residual| ≤ 1e-6 after refinement at a = -0.5."""
        refined = refine_minimum(-0.5)
        assert abs(refined.critical_residual) <= REFINED_TOL
        assert abs(refined.beta - refined.levels[-1].beta) < 1e-5

    @pytest.mark.slow
    def test_residual_order(self, coarse_disc):
        """Test second-order decay of the residual at a = -0.75."""
        refined = refine_minimum(-0.75, coarse_disc)
        assert refined.orders["critical_residual"] >= ORDER_WINDOW[0]
        assert len(refined.deltas) == 3


class TestBoundsTable:
    """Tests for bounds_table."""

    def test_rows(self, coarse_disc):
        """Test the strict bounds and the a = -1 equality row."""
        table = bounds_table([-0.1, -0.9, -1.0], coarse_disc)
        assert list(table["a"]) == [-0.1, -0.9, -1.0]
        assert table["all_ok"].all()

        small = table.iloc[0]
        assert small["beta"] < 0.1
        near = table.iloc[1]
        assert near["abs_a_theta0"] == pytest.approx(0.531, abs=5e-3)
        assert near["abs_a_theta0"] < near["beta"] < near["theta0"]

        boundary = table.iloc[2]
        assert boundary["lower_ok"] is None
        assert abs(boundary["beta"] - boundary["theta0"]) <= REFINED_TOL

    def test_parallel(self, coarse_disc):
        """Test identical tables with several workers."""
        serial = bounds_table([-0.5, -0.75], coarse_disc)
        parallel = bounds_table([-0.5, -0.75], coarse_disc, workers=2)
        assert list(serial["beta"]) == list(parallel["beta"])

    def test_rejects_positive_a(self, coarse_disc):
        """Test rejection of a outside [-1, 0)."""
        with pytest.raises(ParameterError):
            bounds_table([0.5], coarse_disc)

    def test_endpoint_approach(self, coarse_disc):
        """Test βₐ → Θ₀ as a → -1."""
        table = bounds_table([-0.9, -0.99], coarse_disc)
        gaps = (table["beta"] - table["theta0"]).abs()
        assert gaps.iloc[1] < gaps.iloc[0]


class TestTrialStateBound:
    """Tests for the glued Neumann trial state."""

    def test_bound_above_beta(self, coarse_disc):
        """Test βₐ ≤ bound < Θ₀ when Θ₀ < |a|."""
        result = trial_state_bound(-0.75, coarse_disc)
        assert result.beta <= result.bound
        assert result.checks["f_negative"]
        assert result.checks["bound_below_theta0"]
        assert all(result.checks.values())

    def test_identity_for_f(self, coarse_disc):
        """Test |a|λᴺ(α) - Θ₀ = |a|(λᴺ(α) - α²) through ξ₀² = Θ₀."""
        result = trial_state_bound(-0.75, coarse_disc)
        assert result.f_value == pytest.approx(result.f_identity, abs=1e-3)
        assert 0.0 < result.fraction < 1.0

    def test_supplied_beta(self, coarse_disc):
        """Test that a supplied β is used as is."""
        result = trial_state_bound(-0.5, coarse_disc, beta=0.3)
        assert result.beta == 0.3

    @pytest.mark.parametrize("a", [-1.0, 0.5])
    def test_rejects_endpoint(self, coarse_disc, a):
        """Test rejection of a outside (-1, 0)."""
        with pytest.raises(ParameterError):
            trial_state_bound(a, coarse_disc)


class TestStepConstant:
    """Tests for step_constant."""

    def test_positive_a(self, coarse_disc):
        """Test βₐ = a, not attained, for a ∈ (0, 1)."""
        result = step_constant(0.5, coarse_disc)
        assert result.beta == 0.5
        assert not result.attained
        assert result.sampled_minimum > 0.5

    def test_symmetric_step(self, coarse_disc):
        """Test that a = -1 carries Θ₀."""
        result = step_constant(-1.0, coarse_disc)
        assert result.attained
        assert result.beta == pytest.approx(result.theta0, abs=REFINED_TOL)

    def test_negative_a(self, coarse_disc):
        """Test the attained minimum for a ∈ (-1, 0)."""
        result = step_constant(-0.5, coarse_disc)
        assert result.attained
        assert result.zeta < 0
        assert result.theta0 is None
        assert set(result.to_dict()) == {"a", "beta", "attained", "zeta", "sampled_minimum", "theta0"}
