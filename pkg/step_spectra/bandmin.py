"""
Minimization of the step band.

Computes the minimizer ζₐ and the step constant βₐ = μₐ(ζₐ), witnesses
uniqueness of the minimum at scan resolution, compares the finite-difference
curvature with 2(1/a - 1)ζφ(0)², and checks the two-sided bounds
|a|Θ₀ < βₐ < min(|a|, Θ₀) and the sign of φ'(0). Also provides the
Robin trial-state upper bound and βₐ over the whole range a ∈ [-1, 1).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from step_spectra.errors import NonAttainmentError, ParameterError
from step_spectra.robin import neumann_band, theta0 as robin_theta0, xi0 as robin_xi0
from step_spectra.specdisc import (
    Discretization,
    ScanBracket,
    minimize_bracketed,
    observed_order,
    richardson,
    scan_bracket,
    second_derivative,
)
from step_spectra.stepband import (
    BandPoint,
    StepParams,
    band_ground_state,
    band_point,
    band_value,
)

logger = logging.getLogger(__name__)

SCAN_LO = -6.0
SCAN_HI = 1.0
SCAN_STEP = 0.05
# Relative agreement required between finite-difference and closed-form μ″.
CURVATURE_RTOL = 1e-2
ENDPOINT_TOL = 1e-6


@dataclass
class BandMinimum:
    """Minimizer, step constant and verification flags for one a."""
    a: float
    zeta: float
    beta: float
    mu2: float                  # finite-difference μ″(ζ), Richardson-refined
    mu2_closed: float           # 2(1/a - 1)ζφ(0)²
    gamma_min: float            # φ'(0)/φ(0) at ζ
    phi0: float
    dphi0: float
    theta0: float
    mu_second: Optional[float] = None
    bracket: Optional[ScanBracket] = None
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def critical_residual(self) -> float:
        return (self.beta - self.zeta**2) * self.phi0**2 + self.dphi0**2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "zeta": self.zeta,
            "beta": self.beta,
            "mu2": self.mu2,
            "mu2_closed": self.mu2_closed,
            "gamma_min": self.gamma_min,
            "phi0": self.phi0,
            "dphi0": self.dphi0,
            "theta0": self.theta0,
            "mu_second": self.mu_second,
            "critical_residual": self.critical_residual,
            "bracket_lo": self.bracket.lo if self.bracket else None,
            "bracket_hi": self.bracket.hi if self.bracket else None,
            "bracket_minima": self.bracket.local_minima if self.bracket else None,
            "checks": dict(self.checks),
        }


def _require_attained(a: float) -> StepParams:
    params = StepParams(a)
    if params.a > 0:
        logger.warning(f"a={a}: infimum not attained, step constant equals a")
        raise NonAttainmentError(params.a)
    return params


def minimize_band(
    a: float,
    disc: Optional[Discretization] = None,
    theta0: Optional[float] = None,
    bracket: Optional[ScanBracket] = None,
    scan_lo: float = SCAN_LO,
    scan_hi: float = SCAN_HI,
    scan_step: float = SCAN_STEP,
    xtol: float = 1e-10,
    fd_step: float = 1e-3,
) -> BandMinimum:
    """
    Find ζₐ and βₐ for a ∈ [-1, 0).

    Args:
        a: Field ratio
        disc: Discretization options
        theta0: Θ₀ on the same discretization (computed when None)
        bracket: Reuse a scan bracket from a coarser grid instead of scanning
        scan_lo, scan_hi, scan_step: Bracketing scan
        xtol: Brent tolerance on ξ
        fd_step: Step of the five-point curvature stencil

    Returns:
        BandMinimum with its verification flags

    Raises:
        NonAttainmentError: for a ∈ (0, 1)
        BracketError: no interior minimum, or several, on the scan
    """
    params = _require_attained(a)
    disc = disc or Discretization()
    if theta0 is None:
        theta0 = robin_theta0(disc)

    def value(xi: float) -> float:
        return band_value(params, xi, disc)

    def slope(xi: float) -> float:
        return band_ground_state(params, xi, disc)[1]

    if bracket is None:
        count = int(round((scan_hi - scan_lo) / scan_step))
        xs = scan_lo + scan_step * np.arange(count + 1)
        bracket = scan_bracket(value, xs)
    logger.info(f"Minimizing band for a={params.a} in [{bracket.lo:.4g}, {bracket.hi:.4g}]")

    zeta = minimize_bracketed(value, slope, bracket, xtol=xtol)
    point = band_point(params, zeta, disc)
    mu2, _ = second_derivative(value, zeta, fd_step)
    mu2_closed = 2.0 * (1.0 / params.a - 1.0) * zeta * point.phi0**2

    m = BandMinimum(
        a=params.a,
        zeta=zeta,
        beta=point.mu,
        mu2=mu2,
        mu2_closed=mu2_closed,
        gamma_min=point.gamma,
        phi0=point.phi0,
        dphi0=point.dphi0_right,
        theta0=theta0,
        mu_second=point.mu_second,
        bracket=bracket,
    )
    m.checks.update(_theorem_checks(m, disc))
    logger.info(f"a={params.a}: zeta={zeta:.12g} beta={m.beta:.12g} mu2={mu2:.6g} closed={mu2_closed:.6g}")
    for name, ok in m.checks.items():
        if not ok:
            logger.warning(f"a={params.a}: check '{name}' failed")
    return m


def _theorem_checks(m: BandMinimum, disc: Discretization) -> Dict[str, bool]:
    abs_a = abs(m.a)
    checks = {
        "zeta_negative": m.zeta < 0,
        "unique_bracket": m.bracket is not None and m.bracket.local_minima == 1,
        "mu2_positive": m.mu2 > 0 and m.mu2_closed > 0,
        "mu2_matches_closed": abs(m.mu2 - m.mu2_closed) <= CURVATURE_RTOL * abs(m.mu2_closed),
        "spectral_gap_positive": m.mu_second is None or m.mu_second > m.beta,
    }
    if m.a == -1.0:
        # φ is even; the one-sided trace carries an O(δ²) stencil bias.
        checks["endpoint_equality"] = abs(m.beta - m.theta0) <= ENDPOINT_TOL
        checks["gamma_min_zero"] = abs(m.gamma_min) <= ENDPOINT_TOL + 2.0 * disc.delta**2
    else:
        checks["lower_bound"] = abs_a * m.theta0 < m.beta
        checks["upper_bound_abs"] = m.beta < abs_a
        checks["upper_bound_theta"] = m.beta < m.theta0
        checks["gamma_negative"] = m.gamma_min < 0
    return checks


def critical_identity_check(m: BandMinimum, point: BandPoint) -> float:
    """Residual (β - ζ²)φ(0)² + φ'(0)² at the minimum."""
    if abs(point.xi - m.zeta) > 1e-8 * (1.0 + abs(m.zeta)):
        raise ParameterError(f"band point at xi={point.xi} is not at the minimizer {m.zeta}", key="xi")
    return (m.beta - m.zeta**2) * point.phi0**2 + point.dphi0_right**2


def bounds_table(
    a_values: Sequence[float],
    disc: Optional[Discretization] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """
    One row per a with |a|Θ₀, βₐ, |a|, Θ₀ and the strict-inequality flags.

    The row a = -1 is the boundary case: βₐ = Θ₀ replaces the strict
    inequalities, which are left empty.
    """
    disc = disc or Discretization()
    for a in a_values:
        if not -1.0 <= a < 0.0:
            raise ParameterError(f"bounds_table needs a in [-1, 0), got {a}", key="a")
    theta = robin_theta0(disc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            minima = list(executor.map(lambda a: minimize_band(a, disc, theta0=theta), a_values))
    else:
        minima = [minimize_band(a, disc, theta0=theta) for a in a_values]

    rows = []
    for m in minima:
        abs_a = abs(m.a)
        row: Dict[str, Any] = {
            "a": m.a,
            "abs_a_theta0": abs_a * theta,
            "beta": m.beta,
            "abs_a": abs_a,
            "theta0": theta,
        }
        if m.a == -1.0:
            row.update(lower_ok=None, upper_abs_ok=None, upper_theta_ok=None)
            row["all_ok"] = abs(m.beta - theta) <= ENDPOINT_TOL
        else:
            row["lower_ok"] = abs_a * theta < m.beta
            row["upper_abs_ok"] = m.beta < abs_a
            row["upper_theta_ok"] = m.beta < theta
            row["all_ok"] = row["lower_ok"] and row["upper_abs_ok"] and row["upper_theta_ok"]
        if not row["all_ok"]:
            logger.warning(f"bound violated for a={m.a}: beta={m.beta:.12g}")
        rows.append(row)
    return pd.DataFrame(rows)


@dataclass
class TrialStateBound:
    """Upper bound on βₐ from the glued Neumann ground state at ξ₀."""
    a: float
    theta0: float
    xi0: float
    alpha: float                # ξ₀/√|a|
    lambda_alpha: float         # λᴺ(α)
    matching: float             # c = u(0;ξ₀)/u(0;α)
    f_value: float              # |a|λᴺ(α) - Θ₀
    f_identity: float           # |a|(λᴺ(α) - α²)
    fraction: float             # mass of the trial state on τ < 0
    bound: float
    beta: float
    checks: Dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "theta0": self.theta0,
            "xi0": self.xi0,
            "alpha": self.alpha,
            "lambda_alpha": self.lambda_alpha,
            "matching": self.matching,
            "f_value": self.f_value,
            "f_identity": self.f_identity,
            "fraction": self.fraction,
            "bound": self.bound,
            "beta": self.beta,
            "checks": dict(self.checks),
        }


def trial_state_bound(
    a: float,
    disc: Optional[Discretization] = None,
    beta: Optional[float] = None,
) -> TrialStateBound:
    """
    Rayleigh quotient of g = u_{ξ₀} on τ ≥ 0 and c·u_α(√|a|·|τ|) on τ < 0.

    With both Neumann states normalized, the quotient at ξ = ξ₀ equals
    Θ₀ + f(|a|)·fraction with f(x) = x·λᴺ(ξ₀/√x) - Θ₀ and
    fraction = (c²/√|a|)/(1 + c²/√|a|).
    """
    params = StepParams(a)
    if not -1.0 < params.a < 0.0:
        raise ParameterError(f"trial_state_bound needs a in (-1, 0), got {a}", key="a")
    disc = disc or Discretization()
    abs_a = abs(params.a)
    theta = robin_theta0(disc)
    xi_0 = robin_xi0(disc)
    alpha = xi_0 / math.sqrt(abs_a)

    ground = neumann_band(xi_0, disc)
    scaled = neumann_band(alpha, disc)
    c = ground.at_zero / scaled.at_zero
    weight = c**2 / math.sqrt(abs_a)
    fraction = weight / (1.0 + weight)
    f_value = abs_a * scaled.value - theta
    f_identity = abs_a * (scaled.value - alpha**2)
    bound = theta + f_value * fraction
    if beta is None:
        beta = minimize_band(params.a, disc, theta0=theta).beta

    result = TrialStateBound(
        a=params.a,
        theta0=theta,
        xi0=xi_0,
        alpha=alpha,
        lambda_alpha=scaled.value,
        matching=c,
        f_value=f_value,
        f_identity=f_identity,
        fraction=fraction,
        bound=bound,
        beta=beta,
    )
    result.checks["beta_below_bound"] = beta <= bound
    if theta < abs_a:
        result.checks["f_negative"] = f_value < 0
        result.checks["bound_below_theta0"] = bound < theta
    logger.info(f"trial-state bound a={params.a}: bound={bound:.12g} beta={beta:.12g} f={f_value:.6g}")
    return result


@dataclass
class StepConstant:
    """βₐ over a ∈ [-1, 1) with attainment information."""
    a: float
    beta: float
    attained: bool
    zeta: Optional[float] = None
    sampled_minimum: Optional[float] = None
    theta0: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "beta": self.beta,
            "attained": self.attained,
            "zeta": self.zeta,
            "sampled_minimum": self.sampled_minimum,
            "theta0": self.theta0,
        }


def step_constant(a: float, disc: Optional[Discretization] = None) -> StepConstant:
    """
    βₐ for any admissible a.

    For a ∈ (0, 1) the infimum a is not attained; the band is sampled on
    [-4, 8] to witness μₐ > a. Otherwise βₐ comes from minimize_band, and
    a = -1 carries Θ₀ from the Robin model for comparison.
    """
    params = StepParams(a)
    disc = disc or Discretization()
    if params.a > 0:
        samples = [band_value(params, x, disc) for x in np.linspace(-4.0, 8.0, 25)]
        low = float(min(samples))
        if low <= params.a:
            logger.warning(f"a={params.a}: sampled band minimum {low:.12g} is not above a")
        return StepConstant(a=params.a, beta=params.a, attained=False, sampled_minimum=low)
    theta = robin_theta0(disc)
    m = minimize_band(params.a, disc, theta0=theta)
    return StepConstant(
        a=params.a,
        beta=m.beta,
        attained=True,
        zeta=m.zeta,
        theta0=theta if params.a == -1.0 else None,
    )


@dataclass
class RefinedMinimum:
    """Band minimum on δ, δ/2, δ/4 with Richardson-extrapolated quantities."""
    a: float
    levels: List[BandMinimum]
    deltas: List[float]
    zeta: float
    beta: float
    theta0: float
    mu2_closed: float
    gamma_min: float
    critical_residual: float
    orders: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "deltas": list(self.deltas),
            "zeta": self.zeta,
            "beta": self.beta,
            "theta0": self.theta0,
            "mu2_closed": self.mu2_closed,
            "gamma_min": self.gamma_min,
            "critical_residual": self.critical_residual,
            "orders": dict(self.orders),
        }


def refine_minimum(a: float, disc: Optional[Discretization] = None) -> RefinedMinimum:
    """Run minimize_band on three halved grids, reusing the coarse bracket."""
    disc = disc or Discretization()
    levels: List[BandMinimum] = []
    bracket = None
    for k in range(3):
        level_disc = disc.refined(2**k)
        m = minimize_band(a, level_disc, bracket=bracket)
        bracket = bracket or m.bracket
        levels.append(m)
    deltas = [disc.delta / 2**k for k in range(3)]

    def extrapolate(name: str) -> float:
        return richardson([getattr(m, name) for m in levels], deltas)

    residuals = [m.critical_residual for m in levels]
    result = RefinedMinimum(
        a=levels[0].a,
        levels=levels,
        deltas=deltas,
        zeta=extrapolate("zeta"),
        beta=extrapolate("beta"),
        theta0=extrapolate("theta0"),
        mu2_closed=extrapolate("mu2_closed"),
        gamma_min=extrapolate("gamma_min"),
        critical_residual=richardson(residuals, deltas),
        orders={
            "beta": observed_order([m.beta for m in levels]),
            "critical_residual": observed_order(residuals),
        },
    )
    logger.info(
        f"refined a={result.a}: beta={result.beta:.12g} zeta={result.zeta:.12g} "
        f"residual={result.critical_residual:.3e}"
    )
    return result
