"""
step-spectra

Spectral toolkit for one-dimensional Schrödinger operators arising from
magnetic step fields: band functions, step constants, the Robin de Gennes
model, ground-state moments, curvature-weighted expansions and
Ginzburg-Landau critical fields.
"""

__version__ = "0.1.0"
__author__ = "step-spectra contributors"

from step_spectra.errors import NumericalError, ParameterError, SpectraError
from step_spectra.specdisc import Discretization, EigenPair, Grid, build_fd_operator, eigs_smallest
from step_spectra.stepband import BandPoint, StepParams, band_curve, band_point
from step_spectra.robin import DeGennesPoint, RobinParams, de_gennes, robin_eig, theta0
from step_spectra.bandmin import BandMinimum, minimize_band, step_constant, trial_state_bound
from step_spectra.moments import GroundStateBundle, build_approx_eigenpair, ground_state_bundle, moment
from step_spectra.curvature import ExpansionFit, WeightedParams, beta_weighted, expansion_fit
from step_spectra.glfields import CriticalFields, Regime, classify, critical_fields
from step_spectra.verify import VerificationReport, run_verification

__all__ = [
    "SpectraError",
    "ParameterError",
    "NumericalError",
    "Discretization",
    "Grid",
    "EigenPair",
    "build_fd_operator",
    "eigs_smallest",
    "StepParams",
    "BandPoint",
    "band_point",
    "band_curve",
    "RobinParams",
    "DeGennesPoint",
    "robin_eig",
    "de_gennes",
    "theta0",
    "BandMinimum",
    "minimize_band",
    "step_constant",
    "trial_state_bound",
    "GroundStateBundle",
    "ground_state_bundle",
    "moment",
    "build_approx_eigenpair",
    "WeightedParams",
    "ExpansionFit",
    "beta_weighted",
    "expansion_fit",
    "CriticalFields",
    "Regime",
    "critical_fields",
    "classify",
    "VerificationReport",
    "run_verification",
]
