"""
Curvature-weighted step model.

The operator ℋ_{a,ξ,𝔨,h} is the Friedrichs extension of the form

    q(u) = ∫ (|u'|² + (1 + 2𝔨h^{1/2}τ)(στ + ξ - 𝔨h^{1/2}στ²/2)² u²)(1 - 𝔨h^{1/2}τ) dτ

in L²((1 - 𝔨h^{1/2}τ)dτ) with Dirichlet ends. The form is discretized
directly (midpoint weights in the gradient term, lumped potential and
mass), which keeps the pencil symmetric. Also provides the ground energy
β_{a,𝔨,h}, the h^{1/2} expansion fit and the two-term edge energy.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from step_spectra.bandmin import minimize_band
from step_spectra.errors import ParameterError
from step_spectra.moments import ground_state_bundle, moment
from step_spectra.specdisc import (
    Discretization,
    GeneralizedSystem,
    Grid,
    ScanBracket,
    TridiagonalSystem,
    eigs_smallest,
    loglog_slope,
    minimize_bracketed,
    quadrature,
)
from step_spectra.stepband import StepParams, sigma

logger = logging.getLogger(__name__)

DEFAULT_DELTA_EXP = 1.0 / 24.0
DEFAULT_LENGTH_CAP = 40.0
DEFAULT_H_VALUES = (1e-3, 2.5e-4, 6.25e-5, 1.5625e-5)
# Largest |𝔨h^{1/2}τ| kept in the box; the weight stays above 2/3.
WEIGHT_BOUND = 1.0 / 3.0
REMAINDER_FLOOR = 1e-10
BRACKET_HALF_WIDTH = 0.3


@dataclass(frozen=True)
class WeightedParams:
    """Parameters (a, 𝔨, h, δ, M) of the weighted model."""
    a: float
    kappa: float
    h: float
    delta_exp: float = DEFAULT_DELTA_EXP
    curvature_cap: float = 1.0

    def __post_init__(self):
        if not -1.0 < self.a < 0.0:
            raise ParameterError(f"weighted model needs a in (-1, 0), got {self.a}", key="a")
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ParameterError(f"h must be positive, got {self.h}", key="h")
        if not 0.0 < self.delta_exp < 1.0 / 12.0:
            raise ParameterError(f"delta_exp must lie in (0, 1/12), got {self.delta_exp}", key="delta_exp")
        if abs(self.kappa) > self.curvature_cap:
            raise ParameterError(
                f"|kappa|={abs(self.kappa)} exceeds the curvature cap {self.curvature_cap}", key="kappa"
            )
        if self.curvature_cap * self.h ** (0.5 - self.delta_exp) >= WEIGHT_BOUND:
            raise ParameterError(
                f"M·h^(1/2-δ) = {self.curvature_cap * self.h ** (0.5 - self.delta_exp):.4g} is not below 1/3",
                key="h",
            )

    @property
    def sqrt_h(self) -> float:
        return math.sqrt(self.h)

    @property
    def literal_half_length(self) -> float:
        """h^{-δ}."""
        return self.h ** (-self.delta_exp)

    def weight(self, tau: np.ndarray) -> np.ndarray:
        return 1.0 - self.kappa * self.sqrt_h * np.asarray(tau, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "kappa": self.kappa,
            "h": self.h,
            "delta_exp": self.delta_exp,
            "curvature_cap": self.curvature_cap,
        }


def admissible_half_length(params: WeightedParams, delta: float, length_cap: float = DEFAULT_LENGTH_CAP) -> float:
    """min(length_cap, 1/(3·M·h^{1/2})), rounded down to whole cells of width delta."""
    ell = min(length_cap, WEIGHT_BOUND / (params.curvature_cap * params.sqrt_h))
    cells = int(math.floor(ell / delta + 1e-9))
    if cells < 2:
        raise ParameterError(f"weighted interval half-length {ell} is below two cells", key="h")
    return cells * delta


def weighted_grid(params: WeightedParams, disc: Discretization, length_cap: float = DEFAULT_LENGTH_CAP) -> Grid:
    ell = admissible_half_length(params, disc.delta, length_cap)
    return Grid.from_extents(ell, ell, disc.delta)


def weighted_potential(params: WeightedParams, xi: float, tau: np.ndarray) -> np.ndarray:
    """(1 + 2𝔨h^{1/2}τ)(στ + ξ - 𝔨h^{1/2}στ²/2)²; the form's potential before the weight."""
    s = sigma(params.a, tau)
    eps = params.kappa * params.sqrt_h
    return (1.0 + 2.0 * eps * tau) * (s * tau + xi - eps * s * tau**2 / 2.0) ** 2


def weighted_system_on(params: WeightedParams, xi: float, grid: Grid) -> GeneralizedSystem:
    """Form discretization on a given grid with Dirichlet ends."""
    tau = grid.nodes
    w = params.weight(tau)
    if np.any(w <= 0):
        i = int(np.flatnonzero(w <= 0)[0])
        raise ParameterError(f"weight 1 - kappa·h^(1/2)·tau is not positive at tau={tau[i]:.6g}", key="kappa")
    w_mid = params.weight(tau[:-1] + grid.delta / 2.0)
    inv = 1.0 / grid.delta**2
    potential = weighted_potential(params, xi, tau) * w
    diag = (w_mid[:-1] + w_mid[1:]) * inv + potential[1:-1]
    offdiag = -w_mid[1:-1] * inv
    stiffness = TridiagonalSystem(diag, offdiag, grid, offset=1)
    return GeneralizedSystem(stiffness, w[1:-1])


def weighted_system(
    params: WeightedParams,
    xi: float,
    disc: Optional[Discretization] = None,
    length_cap: float = DEFAULT_LENGTH_CAP,
) -> GeneralizedSystem:
    """
    Discretize the weighted form at ξ on [-ℓ, ℓ].

    ℓ is the admissible half-length: the largest interval on which
    |𝔨h^{1/2}τ| ≤ 1/3 for every |𝔨| ≤ M, capped at length_cap.
    """
    disc = disc or Discretization()
    return weighted_system_on(params, xi, weighted_grid(params, disc, length_cap))


def _weighted_pair(params: WeightedParams, xi: float, grid: Grid, disc: Discretization):
    system = weighted_system_on(params, xi, grid)
    return eigs_smallest(system, k=1, tol=disc.tol, max_iterations=disc.max_inverse_iterations)[0]


def weighted_slope(params: WeightedParams, xi: float, grid: Grid, u: np.ndarray) -> float:
    """Exact ξ-derivative of the discrete eigenvalue for the mass-normalized u."""
    tau = grid.nodes
    s = sigma(params.a, tau)
    eps = params.kappa * params.sqrt_h
    dpot = 2.0 * (1.0 + 2.0 * eps * tau) * (s * tau + xi - eps * s * tau**2 / 2.0) * params.weight(tau)
    return quadrature(grid, dpot * u**2)


@dataclass
class WeightedMinimum:
    """β_{a,𝔨,h} with its minimizer and the interval used."""
    params: WeightedParams
    beta: float
    xi_star: float
    half_length: float
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            **self.params.to_dict(),
            "beta": self.beta,
            "xi_star": self.xi_star,
            "half_length": self.half_length,
            "literal_half_length": self.params.literal_half_length,
            "n": self.n,
        }


def beta_weighted(
    params: WeightedParams,
    disc: Optional[Discretization] = None,
    zeta: Optional[float] = None,
    length_cap: float = DEFAULT_LENGTH_CAP,
    xtol: float = 1e-10,
) -> WeightedMinimum:
    """
    Minimize λ₁(ℋ_{a,ξ,𝔨,h}) over ξ.

    The search is seeded at ζₐ: Brent on [ζₐ - 0.3, ζₐ + 0.3], then a
    root polish on the discrete ξ-derivative.
    """
    disc = disc or Discretization()
    if zeta is None:
        zeta = minimize_band(params.a, disc).zeta
    grid = weighted_grid(params, disc, length_cap)

    def value(xi: float) -> float:
        return _weighted_pair(params, xi, grid, disc).value

    def slope(xi: float) -> float:
        return weighted_slope(params, xi, grid, _weighted_pair(params, xi, grid, disc).vector)

    bracket = ScanBracket(zeta - BRACKET_HALF_WIDTH, zeta, zeta + BRACKET_HALF_WIDTH, [])
    xi_star = minimize_bracketed(value, slope, bracket, xtol=xtol)
    result = WeightedMinimum(params, value(xi_star), xi_star, grid.hi, grid.n)
    logger.debug(f"beta_weighted kappa={params.kappa} h={params.h}: {result.beta:.15g} at {xi_star:.12g}")
    return result


@dataclass
class ExpansionFit:
    """Least-squares fit of β_{a,𝔨,h} - β_{a,0,h} to s·h^{1/2} + t·h."""
    a: float
    kappa: float
    h_values: List[float]
    beta_kappa: List[float]
    beta_reference: List[float]
    xi_star: List[float]
    half_lengths: List[float]
    literal_half_lengths: List[float]
    slope: float
    linear: float
    m3: float
    remainders: List[float]
    remainder_slope: Optional[float]
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def expected_slope(self) -> float:
        return self.kappa * self.m3

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.expected_slope) / abs(self.m3)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "kappa": self.kappa,
            "slope": self.slope,
            "expected_slope": self.expected_slope,
            "relative_error": self.relative_error,
            "linear": self.linear,
            "m3": self.m3,
            "remainder_slope": self.remainder_slope,
            "h_values": list(self.h_values),
            "beta_kappa": list(self.beta_kappa),
            "beta_reference": list(self.beta_reference),
            "remainders": list(self.remainders),
            "half_lengths": list(self.half_lengths),
            "literal_half_lengths": list(self.literal_half_lengths),
            "checks": dict(self.checks),
        }

    def rows(self) -> List[Dict[str, float]]:
        return [
            {
                "h": h,
                "beta_kappa": bk,
                "beta_reference": b0,
                "difference": bk - b0,
                "remainder": r,
                "xi_star": x,
                "half_length": ell,
                "literal_half_length": lit,
            }
            for h, bk, b0, r, x, ell, lit in zip(
                self.h_values,
                self.beta_kappa,
                self.beta_reference,
                self.remainders,
                self.xi_star,
                self.half_lengths,
                self.literal_half_lengths,
            )
        ]


def expansion_fit(
    a: float,
    kappa: float,
    h_values: Sequence[float] = DEFAULT_H_VALUES,
    disc: Optional[Discretization] = None,
    delta_exp: float = DEFAULT_DELTA_EXP,
    length_cap: float = DEFAULT_LENGTH_CAP,
    m3: Optional[float] = None,
    slope_rtol: float = 0.05,
    curvature_cap: Optional[float] = None,
) -> ExpansionFit:
    """
    Fit β_{a,𝔨,h} - β_{a,0,h} = s·h^{1/2} + t·h over decreasing h.

    The reference β_{a,0,h} uses the same interval and grid, so the
    truncation and discretization errors common to both cancel. The
    remainder r(h) = difference - s·h^{1/2} must decay with log-log slope
    ≥ 0.7, or stay below 1e-10 (the 𝔨 = 0 case).

    Args:
        a: Field ratio in (-1, 0)
        kappa: Curvature
        h_values: Strictly decreasing semiclassical parameters (≥ 3)
        disc: Discretization options
        delta_exp: Exponent δ of the interval (-h^{-δ}, h^{-δ})
        length_cap: Cap on the half-length of the interval
        m3: Third moment M₃(a) (computed when None)
        slope_rtol: Allowed relative gap between s and 𝔨M₃
        curvature_cap: Bound M on |𝔨| (max(1, |𝔨|) when None)

    Returns:
        ExpansionFit
    """
    h_values = [float(h) for h in h_values]
    if len(h_values) < 3:
        raise ParameterError(f"expansion fit needs at least 3 h values, got {len(h_values)}", key="h")
    if any(h2 >= h1 for h1, h2 in zip(h_values, h_values[1:])):
        raise ParameterError("h values must be strictly decreasing", key="h")
    disc = disc or Discretization()
    cap = max(1.0, abs(kappa)) if curvature_cap is None else curvature_cap
    minimum = minimize_band(a, disc)
    if m3 is None:
        m3 = moment(ground_state_bundle(a, disc, minimum), 3)

    logger.info(f"Expansion fit a={a} kappa={kappa} over h={h_values}")
    beta_k, beta_0, xi_star, lengths, literal = [], [], [], [], []
    for h in h_values:
        curved = WeightedParams(a, kappa, h, delta_exp, cap)
        flat = WeightedParams(a, 0.0, h, delta_exp, cap)
        mk = beta_weighted(curved, disc, minimum.zeta, length_cap)
        m0 = mk if kappa == 0.0 else beta_weighted(flat, disc, minimum.zeta, length_cap)
        beta_k.append(mk.beta)
        beta_0.append(m0.beta)
        xi_star.append(mk.xi_star)
        lengths.append(mk.half_length)
        literal.append(curved.literal_half_length)

    h = np.asarray(h_values)
    diff = np.asarray(beta_k) - np.asarray(beta_0)
    design = np.column_stack([np.sqrt(h), h])
    (s, t), *_ = np.linalg.lstsq(design, diff, rcond=None)
    remainders = diff - s * np.sqrt(h)

    fit = ExpansionFit(
        a=a,
        kappa=kappa,
        h_values=h_values,
        beta_kappa=beta_k,
        beta_reference=beta_0,
        xi_star=xi_star,
        half_lengths=lengths,
        literal_half_lengths=literal,
        slope=float(s),
        linear=float(t),
        m3=m3,
        remainders=remainders.tolist(),
        remainder_slope=None,
    )
    if np.max(np.abs(remainders)) <= REMAINDER_FLOOR:
        fit.checks["remainder_decay"] = True
    else:
        fit.remainder_slope = loglog_slope(h, remainders)
        fit.checks["remainder_decay"] = fit.remainder_slope >= 0.7
    if kappa == 0.0:
        fit.checks["slope_vanishes"] = abs(fit.slope) <= 1e-3 * abs(m3)
    else:
        fit.checks["slope_matches_moment"] = fit.relative_error <= slope_rtol
    fit.checks["minimizer_localized"] = all(
        abs(x - minimum.zeta) <= hv**0.25 for x, hv in zip(xi_star, h_values)
    )
    logger.info(
        f"Expansion fit slope={fit.slope:.10g} expected={fit.expected_slope:.10g} "
        f"remainder_slope={fit.remainder_slope}"
    )
    return fit


@dataclass
class GapExponent:
    """Fitted exponent of |λ₁(ℋ_{a,ζ,𝔨,h}) - λ₁(ℋ_{a,ζ,0,h})| in h."""
    a: float
    kappa: float
    h_values: List[float]
    gaps: List[float]
    exponent: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "kappa": self.kappa,
            "h_values": list(self.h_values),
            "gaps": list(self.gaps),
            "exponent": self.exponent,
        }


def weighted_gap_exponent(
    a: float,
    kappa: float = 1.0,
    h_values: Sequence[float] = (1e-3, 2.5e-4, 6.25e-5),
    disc: Optional[Discretization] = None,
    delta_exp: float = DEFAULT_DELTA_EXP,
    length_cap: float = DEFAULT_LENGTH_CAP,
    curvature_cap: Optional[float] = None,
) -> GapExponent:
    """
    Gap between the weighted and the plain ground energies at ξ = ζₐ.

    The plain energy is the 𝔨 = 0 problem on the same interval and grid,
    so only the curvature contributes to the gap. Expected exponent ≥ 0.4.
    """
    disc = disc or Discretization()
    minimum = minimize_band(a, disc)
    cap = max(1.0, abs(kappa)) if curvature_cap is None else curvature_cap
    gaps = []
    for h in h_values:
        curved = WeightedParams(a, kappa, h, delta_exp, cap)
        flat = WeightedParams(a, 0.0, h, delta_exp, cap)
        grid = weighted_grid(curved, disc, length_cap)
        lam_k = _weighted_pair(curved, minimum.zeta, grid, disc).value
        lam_0 = _weighted_pair(flat, minimum.zeta, grid, disc).value
        gaps.append(abs(lam_k - lam_0))
    exponent = loglog_slope(h_values, gaps)
    logger.info(f"weighted gap exponent a={a} kappa={kappa}: {exponent:.3f}")
    return GapExponent(a, kappa, [float(h) for h in h_values], gaps, exponent)


def edge_energy(a: float, k_max: float, h: float, beta: float, m3: float) -> float:
    """Two-term edge energy βₐh + M₃(a)·k_max·h^{3/2}."""
    if not h > 0:
        raise ParameterError(f"h must be positive, got {h}", key="h")
    return beta * h + m3 * k_max * h**1.5


def form_value(params: WeightedParams, xi: float, grid: Grid, u: np.ndarray) -> float:
    """Discrete form value δ·uᵀAu of a grid function vanishing at both ends."""
    system = weighted_system_on(params, xi, grid)
    x = system.stiffness.from_grid(u)
    return float(grid.delta * np.dot(x, system.stiffness.matvec(x)))


def form_integral(
    params: WeightedParams,
    xi: float,
    u: Callable[[float], float],
    du: Callable[[float], float],
    half_length: float,
) -> float:
    """The quadratic form by adaptive quadrature, split at the jump τ = 0."""

    def integrand(tau: float) -> float:
        w = 1.0 - params.kappa * params.sqrt_h * tau
        pot = float(weighted_potential(params, xi, np.array([tau]))[0])
        return (du(tau) ** 2 + pot * u(tau) ** 2) * w

    left, _ = quad(integrand, -half_length, 0.0, limit=200, epsabs=1e-13, epsrel=1e-12)
    right, _ = quad(integrand, 0.0, half_length, limit=200, epsabs=1e-13, epsrel=1e-12)
    return left + right


def apply_weighted_operator(
    a: float,
    kappa: float,
    h: float,
    xi: float,
    grid: Grid,
    f: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply the operator expression

        -f'' + (στ+ξ)²f + 𝔨h^{1/2}(1-𝔨h^{1/2}τ)^{-1}f' + 2𝔨h^{1/2}τ(στ+ξ-𝔨h^{1/2}στ²/2)²f
        - 𝔨h^{1/2}στ²(στ+ξ)f + 𝔨²hσ²τ⁴f/4

    with the three-point Laplacian and numpy.gradient for f'. h = 0 gives
    the plain fiber operator.

    Returns:
        (values, mask): values at every node and the interior nodes with
        |𝔨h^{1/2}τ| ≤ 1/3
    """
    if not 0.0 <= h <= 0.1:
        raise ParameterError(f"h must lie in [0, 0.1], got {h}", key="h")
    f = np.asarray(f, dtype=float)
    tau = grid.nodes
    s = sigma(a, tau)
    eps = kappa * math.sqrt(h)
    lap = np.zeros_like(f)
    lap[1:-1] = (-f[:-2] + 2.0 * f[1:-1] - f[2:]) / grid.delta**2
    df = np.gradient(f, grid.delta, edge_order=2)
    mask = np.zeros(grid.n, dtype=bool)
    mask[1:-1] = True
    mask &= np.abs(eps * tau) <= WEIGHT_BOUND
    inv_weight = np.where(mask, 1.0 / np.where(mask, 1.0 - eps * tau, 1.0), 0.0)
    shifted = s * tau + xi
    values = (
        lap
        + shifted**2 * f
        + eps * inv_weight * df
        + 2.0 * eps * tau * (shifted - eps * s * tau**2 / 2.0) ** 2 * f
        - eps * s * tau**2 * shifted * f
        + eps**2 * s**2 * tau**4 / 4.0 * f
    )
    return values, mask
