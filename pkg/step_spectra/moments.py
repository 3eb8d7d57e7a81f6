"""
Moments of the ground state at the band minimum, the regularized
resolvent, and the formal approximate eigenpair of the curvature-weighted
model.

Mₙ(a) = ∫ (1/σ)(ζ + στ)ⁿ φ² dτ with φ the ground state at ζₐ. The weight
1/σ jumps at τ = 0, so quadratures of this kind are split at the origin.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from step_spectra.bandmin import BandMinimum, minimize_band
from step_spectra.errors import OrthogonalityError, ParameterError
from step_spectra.specdisc import (
    Discretization,
    Grid,
    Side,
    TridiagonalSystem,
    build_fd_operator,
    constrained_solve,
    derivative_at_zero,
    eigs_smallest,
    inner_product,
    l2_norm,
    loglog_slope,
    observed_order,
    quadrature,
    richardson,
)
from step_spectra.stepband import StepParams, sigma, step_grid, step_potential

logger = logging.getLogger(__name__)

ORTH_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GroundStateBundle:
    """Ground state of the fiber operator at the band minimum."""
    a: float
    zeta: float
    beta: float
    phi: np.ndarray
    phi0: float
    dphi0: float
    grid: Grid
    system: TridiagonalSystem
    sigma: np.ndarray
    mu2: float
    mu2_closed: float

    @property
    def tau(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def shifted(self) -> np.ndarray:
        """ζ + στ on the grid."""
        return self.zeta + self.sigma * self.tau

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "zeta": self.zeta,
            "beta": self.beta,
            "phi0": self.phi0,
            "dphi0": self.dphi0,
            "mu2": self.mu2,
            "mu2_closed": self.mu2_closed,
            "grid": self.grid.to_dict(),
        }


def ground_state_bundle(
    a: float,
    disc: Optional[Discretization] = None,
    minimum: Optional[BandMinimum] = None,
) -> GroundStateBundle:
    """Minimize the band (unless given) and keep the ground state at ζₐ."""
    disc = disc or Discretization()
    minimum = minimum or minimize_band(a, disc)
    params = StepParams(minimum.a)
    grid = step_grid(params, minimum.zeta, disc)
    system = build_fd_operator(grid, step_potential(params, minimum.zeta))
    pair = eigs_smallest(system, k=1, tol=disc.tol, max_iterations=disc.max_inverse_iterations)[0]
    logger.debug(f"ground-state bundle a={params.a}: n={grid.n} residual={pair.residual:.3e}")
    return GroundStateBundle(
        a=params.a,
        zeta=minimum.zeta,
        beta=pair.value,
        phi=pair.vector,
        phi0=pair.at_zero,
        dphi0=derivative_at_zero(grid, pair.vector, Side.RIGHT),
        grid=grid,
        system=system,
        sigma=sigma(params.a, grid.nodes),
        mu2=minimum.mu2,
        mu2_closed=minimum.mu2_closed,
    )


def _sigma_weighted(bundle: GroundStateBundle, f: np.ndarray) -> float:
    """∫ (1/σ) f dτ, split at τ = 0."""
    return quadrature(bundle.grid, f, weight=1.0, left_weight=1.0 / bundle.a)


def moment(bundle: GroundStateBundle, n: int) -> float:
    """Mₙ by trapezoidal quadrature."""
    if n < 1:
        raise ParameterError(f"moment order must be at least 1, got {n}", key="n")
    return _sigma_weighted(bundle, bundle.shifted**n * bundle.phi**2)


def moment_closed(bundle: GroundStateBundle, n: int) -> float:
    """
    Closed forms from the boundary traces:
    M₁ = 0, M₂ = -½β∫(1/σ)φ² + ¼(1/a - 1)ζφ(0)φ'(0), M₃ = ⅓(1/a - 1)ζφ(0)φ'(0).
    """
    trace = (1.0 / bundle.a - 1.0) * bundle.zeta * bundle.phi0 * bundle.dphi0
    if n == 1:
        return 0.0
    if n == 2:
        return -0.5 * bundle.beta * _sigma_weighted(bundle, bundle.phi**2) + 0.25 * trace
    if n == 3:
        return trace / 3.0
    raise ParameterError(f"closed forms exist for n in (1, 2, 3), got {n}", key="n")


@dataclass
class MomentIdentities:
    """Quadrature moments against their boundary-trace identities."""
    m1: float
    m1_trace: float             # ½(1 - 1/a²)·((β - ζ²)φ(0)² + φ'(0)²)
    m3: float
    m3_trace: float             # ⅔βM₁ + ⅓(1/a - 1)ζφ(0)φ'(0)

    def to_dict(self) -> Dict[str, Any]:
        return {"m1": self.m1, "m1_trace": self.m1_trace, "m3": self.m3, "m3_trace": self.m3_trace}


def moment_identities(bundle: GroundStateBundle) -> MomentIdentities:
    residual = (bundle.beta - bundle.zeta**2) * bundle.phi0**2 + bundle.dphi0**2
    m1 = moment(bundle, 1)
    trace = (1.0 / bundle.a - 1.0) * bundle.zeta * bundle.phi0 * bundle.dphi0
    return MomentIdentities(
        m1=m1,
        m1_trace=0.5 * (1.0 - 1.0 / bundle.a**2) * residual,
        m3=moment(bundle, 3),
        m3_trace=2.0 / 3.0 * bundle.beta * m1 + trace / 3.0,
    )


def half_line_orthogonality(bundle: GroundStateBundle) -> Tuple[float, float]:
    """(∫_{τ<0} (ζ + aτ)φ², ∫_{τ>0} (ζ + τ)φ²); both vanish at the minimum."""
    i0 = bundle.grid.zero_index
    integrand = bundle.shifted * bundle.phi**2
    left = trapezoid(integrand[:i0 + 1], dx=bundle.grid.delta)
    right = trapezoid(integrand[i0:], dx=bundle.grid.delta)
    return float(left), float(right)


def regularized_resolvent(bundle: GroundStateBundle, v: np.ndarray) -> np.ndarray:
    """
    Inverse of (𝔥ₐ[ζₐ] - βₐ) on the complement of φ, zero on its span.

    v is projected onto the complement first.
    """
    v = np.asarray(v, dtype=float)
    projected = v - inner_product(bundle.grid, v, bundle.phi) * bundle.phi
    return constrained_solve(bundle.system, bundle.beta, None, projected, bundle.phi)


def _check_orthogonal(bundle: GroundStateBundle, name: str, v: np.ndarray, expected: float, tol: float) -> None:
    inner = inner_product(bundle.grid, v, bundle.phi)
    if abs(inner - expected) > tol:
        raise OrthogonalityError(f"{name} is not orthogonal to the ground state", inner)


@dataclass(eq=False)
class ApproxEigenpair:
    """
    Formal eigenpair λ = c₀ + c₁(ξ-ζ) + c₂(ξ-ζ)² + c₃h^{1/2},
    f = u₀ + (ξ-ζ)u₁ + (ξ-ζ)²u₂ + h^{1/2}u₃.
    """
    kappa: float
    zeta: float
    c0: float
    c1: float
    c2: float
    c3: float
    u0: np.ndarray = field(repr=False)
    u1: np.ndarray = field(repr=False)
    u2: np.ndarray = field(repr=False)
    u3: np.ndarray = field(repr=False)
    grid: Grid = field(repr=False)
    v3_inner: float = 0.0       # ⟨v₃, φ⟩ before projection

    def lambda_app(self, xi: float, h: float) -> float:
        s = xi - self.zeta
        return self.c0 + self.c1 * s + self.c2 * s**2 + self.c3 * np.sqrt(h)

    def f_app(self, xi: float, h: float) -> np.ndarray:
        s = xi - self.zeta
        return self.u0 + s * self.u1 + s**2 * self.u2 + np.sqrt(h) * self.u3

    def corrector_inner_products(self) -> List[float]:
        return [inner_product(self.grid, u, self.u0) for u in (self.u1, self.u2, self.u3)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kappa": self.kappa,
            "zeta": self.zeta,
            "c0": self.c0,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "v3_inner": self.v3_inner,
        }


def build_approx_eigenpair(
    bundle: GroundStateBundle,
    kappa: float,
    m3: Optional[float] = None,
    orth_tol: float = ORTH_TOL,
) -> ApproxEigenpair:
    """
    Construct the coefficients c₀..c₃ and correctors u₀..u₃.

    v₁ and v₂ are checked against φ directly. ⟨v₃, φ⟩ equals 𝔨ζ²M₁ on the
    grid, which vanishes only as δ → 0, so v₃ is checked against that value
    and then projected.

    Raises:
        OrthogonalityError: a right-hand side is off by more than orth_tol
    """
    if m3 is None:
        m3 = moment(bundle, 3)
    grid = bundle.grid
    phi = bundle.phi
    shifted = bundle.shifted
    tau = bundle.tau

    v1 = shifted * phi
    _check_orthogonal(bundle, "v1", v1, 0.0, orth_tol)
    r1 = regularized_resolvent(bundle, v1)
    u1 = -2.0 * r1

    c2 = 1.0 - 4.0 * inner_product(grid, v1, r1)
    v2 = 4.0 * shifted * r1 + (c2 - 1.0) * phi
    _check_orthogonal(bundle, "v2", v2, 0.0, orth_tol)
    u2 = regularized_resolvent(bundle, v2)

    c3 = kappa * m3
    if kappa == 0.0:
        u3 = np.zeros_like(phi)
        v3_inner = 0.0
    else:
        dphi = np.gradient(phi, grid.delta, edge_order=2)
        # (1/σ)(στ+ζ)³ - (ζ²/σ)(στ+ζ), written without the jumping 1/σ
        cubic = shifted * (bundle.sigma * tau**2 + 2.0 * bundle.zeta * tau)
        v3 = -kappa * (dphi + cubic * phi) + c3 * phi
        m1 = moment(bundle, 1)
        v3_inner = inner_product(grid, v3, phi)
        _check_orthogonal(bundle, "v3", v3, kappa * bundle.zeta**2 * m1, orth_tol)
        u3 = regularized_resolvent(bundle, v3)

    logger.info(f"approximate eigenpair a={bundle.a} kappa={kappa}: c2={c2:.10g} c3={c3:.10g}")
    return ApproxEigenpair(
        kappa=float(kappa),
        zeta=bundle.zeta,
        c0=bundle.beta,
        c1=0.0,
        c2=c2,
        c3=c3,
        u0=phi,
        u1=u1,
        u2=u2,
        u3=u3,
        grid=grid,
        v3_inner=v3_inner,
    )


# (h, |ξ-ζ|) pairs where h^{1/2}|ξ-ζ| dominates both |ξ-ζ|³ and h.
MIXED_ANCHOR = (1e-4, 0.03)
MIXED_POINTS = ((1e-4, 0.02), (2.5e-5, 0.015), (4e-4, 0.06))


@dataclass
class ResidualScaling:
    """Residual norms of the approximate pair and their fitted exponents."""
    rows: List[Dict[str, float]]
    slope_h: float
    slope_offset: float
    mixed_ratios: List[float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["regime", "h", "offset", "residual", "prediction"])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope_h": self.slope_h,
            "slope_offset": self.slope_offset,
            "mixed_ratios": list(self.mixed_ratios),
            "rows": list(self.rows),
        }


def residual_norm(pair: ApproxEigenpair, bundle: GroundStateBundle, kappa: float, h: float, offset: float) -> float:
    """‖(ℋ - λ^app)f^app‖ on the nodes where |𝔨h^{1/2}τ| ≤ 1/3."""
    from step_spectra.curvature import apply_weighted_operator

    xi = bundle.zeta + offset
    f = pair.f_app(xi, h)
    applied, mask = apply_weighted_operator(bundle.a, kappa, h, xi, bundle.grid, f)
    r = np.where(mask, applied - pair.lambda_app(xi, h) * f, 0.0)
    return l2_norm(bundle.grid, r)


def _max_formula(h: float, offset: float) -> float:
    return max(np.sqrt(h) * abs(offset), abs(offset) ** 3, h)


def residual_scaling(
    pair: ApproxEigenpair,
    bundle: GroundStateBundle,
    kappa: float,
    h_values: Sequence[float] = (1e-4, 2.5e-5, 6.25e-6),
    xi_offsets: Sequence[float] = (0.01, 0.02, 0.04, 0.08),
) -> ResidualScaling:
    """
    Residuals in three regimes: ξ = ζₐ with varying h (exponent 1 in h),
    h = 0 with varying offset (exponent 3), and the mixed regime anchored
    to the max-formula prediction at one point.

    The offset regime is evaluated at h = 0 exactly, not at a small
    surrogate h such as 1e-4.
    """
    if kappa != pair.kappa:
        raise ParameterError(f"pair was built for kappa={pair.kappa}, got {kappa}", key="kappa")
    for h in h_values:
        if not 0.0 <= h <= 0.1:
            raise ParameterError(f"h must lie in [0, 0.1], got {h}", key="h")
    for o in xi_offsets:
        if not 0.0 < abs(o) < 1.0:
            raise ParameterError(f"offsets must satisfy 0 < |xi - zeta| < 1, got {o}", key="xi_offsets")

    rows: List[Dict[str, float]] = []
    h_res = []
    for h in h_values:
        res = residual_norm(pair, bundle, kappa, h, 0.0)
        h_res.append(res)
        rows.append({"regime": "h", "h": h, "offset": 0.0, "residual": res, "prediction": h})
    o_res = []
    for o in xi_offsets:
        res = residual_norm(pair, bundle, kappa, 0.0, o)
        o_res.append(res)
        rows.append({"regime": "offset", "h": 0.0, "offset": o, "residual": res, "prediction": abs(o) ** 3})

    anchor = residual_norm(pair, bundle, kappa, *MIXED_ANCHOR)
    scale = anchor / _max_formula(*MIXED_ANCHOR)
    rows.append({"regime": "anchor", "h": MIXED_ANCHOR[0], "offset": MIXED_ANCHOR[1], "residual": anchor,
                 "prediction": anchor})
    ratios = []
    for h, o in MIXED_POINTS:
        res = residual_norm(pair, bundle, kappa, h, o)
        prediction = scale * _max_formula(h, o)
        ratios.append(res / prediction)
        rows.append({"regime": "mixed", "h": h, "offset": o, "residual": res, "prediction": prediction})

    result = ResidualScaling(
        rows=rows,
        slope_h=loglog_slope(h_values, h_res),
        slope_offset=loglog_slope(np.abs(xi_offsets), o_res),
        mixed_ratios=ratios,
    )
    logger.info(f"residual scaling: slope_h={result.slope_h:.3f} slope_offset={result.slope_offset:.3f}")
    return result


@dataclass
class MomentRefinement:
    """Moments on δ, δ/2, δ/4 with Richardson extrapolation."""
    a: float
    deltas: List[float]
    values: Dict[str, List[float]]
    extrapolated: Dict[str, float]
    orders: Dict[str, float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "deltas": list(self.deltas),
            "values": {k: list(v) for k, v in self.values.items()},
            "extrapolated": dict(self.extrapolated),
            "orders": dict(self.orders),
        }


def moment_summary(bundle: GroundStateBundle) -> Dict[str, float]:
    return {
        "m1": moment(bundle, 1),
        "m2": moment(bundle, 2),
        "m3": moment(bundle, 3),
        "m2_closed": moment_closed(bundle, 2),
        "m3_closed": moment_closed(bundle, 3),
    }


def refine_moments(a: float, disc: Optional[Discretization] = None) -> MomentRefinement:
    """Moments and closed forms on three halved grids, reusing the coarse scan bracket."""
    disc = disc or Discretization()
    summaries = []
    bracket = None
    for k in range(3):
        level = disc.refined(2**k)
        minimum = minimize_band(a, level, bracket=bracket)
        bracket = bracket or minimum.bracket
        summaries.append(moment_summary(ground_state_bundle(a, level, minimum)))
    deltas = [disc.delta / 2**k for k in range(3)]
    values = {name: [s[name] for s in summaries] for name in summaries[0]}
    result = MomentRefinement(
        a=a,
        deltas=deltas,
        values=values,
        extrapolated={name: richardson(v, deltas) for name, v in values.items()},
        orders={name: observed_order(v) for name, v in values.items()},
    )
    logger.info(f"refined moments a={a}: {result.extrapolated}")
    return result
