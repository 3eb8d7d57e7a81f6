"""
Tests for the acceptance suite.
"""

import pytest

from step_spectra.errors import BracketError
from step_spectra.verify import (
    CheckStatus,
    CriterionResult,
    VerificationReport,
    check_convergence_order,
    check_critical_field_ordering,
    check_symmetry_endpoint,
    oscillator_orders,
    run_verification,
)
from tests.fixtures.test_data import ORDER_WINDOW

FAST_CRITERIA = {
    "check_de_gennes_constant": (1, "de Gennes constant"),
    "check_minimizer_identity": (2, "minimizer identity sweep"),
    "check_symmetry_endpoint": (3, "symmetry endpoint"),
    "check_band_minimum_sweep": (4, "band minimum sweep"),
    "check_moments": (5, "moments"),
    "check_feynman_hellmann": (6, "Feynman-Hellmann formulas"),
    "check_critical_field_ordering": (9, "critical-field ordering"),
    "check_convergence_order": (10, "convergence order"),
}
SLOW_CRITERIA = ("check_curvature_expansion", "check_residual_scaling")


@pytest.fixture
def mocked_criteria(mocker):
    """Replace every criterion by a passing stub."""
    mocks = {}
    for name, (number, title) in FAST_CRITERIA.items():
        mocks[name] = mocker.patch(
            f"step_spectra.verify.{name}",
            return_value=CriterionResult(number, title, CheckStatus.PASS, {"value": 1.0}, "ok"),
        )
    for name in SLOW_CRITERIA:
        mocks[name] = mocker.patch(f"step_spectra.verify.{name}")
    return mocks


@pytest.fixture
def sample_report():
    """A report with one criterion of each status."""
    report = VerificationReport(delta=0.005)
    report.add_result(CriterionResult(1, "de Gennes constant", CheckStatus.PASS, {"theta0": 0.5901}, "ok"))
    report.add_result(CriterionResult(3, "symmetry endpoint", CheckStatus.FAIL, {"gap": 1e-3}, "gap too large"))
    report.add_result(CriterionResult(7, "curvature expansion", CheckStatus.SKIPPED, detail="skipped"))
    return report


class TestVerificationReport:
    """Tests for VerificationReport."""

    def test_passed(self, sample_report):
        """Test that any failure fails the report and skips do not."""
        assert not sample_report.passed
        report = VerificationReport(delta=0.005)
        report.add_result(CriterionResult(7, "curvature expansion", CheckStatus.SKIPPED))
        assert report.passed

    def test_summary(self, sample_report):
        """Test counts per status."""
        sample_report.generate_summary()
        assert sample_report.summary == {"pass": 1, "fail": 1, "error": 0, "skipped": 1, "total": 3}

    def test_to_dict(self, sample_report):
        """Test dictionary export."""
        data = sample_report.to_dict()
        assert data["passed"] is False
        assert data["results"][1]["status"] == "fail"
        assert data["results"][1]["measured"] == {"gap": 1e-3}

    def test_to_markdown(self, sample_report):
        """Test the markdown report."""
        text = sample_report.to_markdown()
        assert text.startswith("# Acceptance Report")
        assert "| 3 | symmetry endpoint | FAIL | gap too large |" in text
        assert "## Measurements of failing criteria" in text
        assert "- gap: 0.001" in text
        assert "theta0" not in text


class TestRunVerification:
    """Tests for run_verification with stubbed criteria."""

    def test_quick_mode(self, mocked_criteria, coarse_disc):
        """Test that quick mode skips the curvature and residual studies."""
        report = run_verification(quick=True, disc=coarse_disc)
        statuses = {r.number: r.status for r in report.results}
        assert statuses[7] is CheckStatus.SKIPPED
        assert statuses[8] is CheckStatus.SKIPPED
        assert [r.number for r in report.results] == [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
        assert report.passed
        for name in SLOW_CRITERIA:
            mocked_criteria[name].assert_not_called()

    def test_errors_are_recorded(self, mocked_criteria, coarse_disc):
        """Test that a raised toolkit error becomes an ERROR result."""
        mocked_criteria["check_symmetry_endpoint"].side_effect = BracketError("no interior dip")
        report = run_verification(quick=True, disc=coarse_disc)
        result = next(r for r in report.results if r.number == 3)
        assert result.status is CheckStatus.ERROR
        assert "no interior dip" in result.detail
        assert not report.passed

    def test_progress(self, mocked_criteria, coarse_disc):
        """Test that progress is reported for every criterion that runs."""
        names = []
        run_verification(quick=True, disc=coarse_disc, progress=names.append)
        assert names == [title for _, title in FAST_CRITERIA.values()]

    def test_delta_recorded(self, mocked_criteria, coarse_disc):
        """Test that the report carries the grid spacing."""
        assert run_verification(quick=True, disc=coarse_disc).delta == 0.01


class TestCriteria:
    """Tests for individual criteria."""

    def test_oscillator_orders(self):
        """Test second-order convergence of the first three oscillator levels."""
        orders = oscillator_orders()
        assert set(orders) == {"oscillator_level1", "oscillator_level2", "oscillator_level3"}
        for order in orders.values():
            assert ORDER_WINDOW[0] <= order <= ORDER_WINDOW[1]

    def test_symmetry_endpoint(self, coarse_disc):
        """Test β₋₁ = Θ₀ on a common grid."""
        result = check_symmetry_endpoint(coarse_disc)
        assert result.status is CheckStatus.PASS
        assert result.measured["gap"] <= 1e-6

    @pytest.mark.slow
    def test_convergence_order(self, coarse_disc):
        """Test the convergence-order criterion."""
        result = check_convergence_order(coarse_disc)
        assert result.status is CheckStatus.PASS

    def test_critical_field_ordering(self, coarse_disc):
        """Test strict ordering of the critical fields across the sweep."""
        result = check_critical_field_ordering(coarse_disc)
        assert result.status is CheckStatus.PASS
        for fields in result.measured.values():
            assert fields["bc1"] < fields["bc2"] < fields["bc3"]
