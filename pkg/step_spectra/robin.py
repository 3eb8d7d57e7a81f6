"""
Robin half-line harmonic oscillator.

H[γ,ξ] = -d²/dτ² + (τ + ξ)² on τ > 0 with u'(0) = γu(0). Provides its
eigenpairs, the Feynman-Hellmann derivatives in ξ and γ, the de Gennes
function Θ(γ) = min_ξ λ¹(γ,ξ) with its minimizer, and Θ₀ = Θ(0).
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Optional

import numpy as np

from step_spectra.errors import ParameterError
from step_spectra.specdisc import (
    BoundarySpec,
    Discretization,
    EigenPair,
    GeneralizedSystem,
    Grid,
    build_fd_operator,
    eigs_smallest,
    minimize_bracketed,
    quadrature,
    scan_bracket,
    second_derivative,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RobinParams:
    """Robin coefficient γ and shift ξ."""
    gamma: float
    xi: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and math.isfinite(self.xi)):
            raise ParameterError(f"gamma and xi must be finite, got ({self.gamma}, {self.xi})", key="gamma")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "xi", float(self.xi))


def robin_grid(xi: float, disc: Discretization) -> Grid:
    """Half-line box [0, |ξ| + L], or [0, length] when fixed."""
    length = disc.length if disc.length is not None else abs(xi) + disc.margin
    return Grid.half_line(length, disc.delta)


def robin_system(params: RobinParams, disc: Discretization) -> GeneralizedSystem:
    grid = robin_grid(params.xi, disc)
    xi = params.xi
    return build_fd_operator(grid, lambda tau: (tau + xi) ** 2, BoundarySpec.robin(params.gamma))


def robin_eig(params: RobinParams, j: int = 1, disc: Optional[Discretization] = None) -> EigenPair:
    """j-th eigenpair (1-based) with u(0) > 0."""
    if j < 1:
        raise ParameterError(f"j must be at least 1, got {j}", key="j")
    disc = disc or Discretization()
    pairs = eigs_smallest(robin_system(params, disc), k=j, tol=disc.tol, max_iterations=disc.max_inverse_iterations)
    return pairs[j - 1]


def robin_value(gamma: float, xi: float, disc: Discretization) -> float:
    return robin_eig(RobinParams(gamma, xi), 1, disc).value


def dlambda_dxi(params: RobinParams, j: int, pair: EigenPair) -> float:
    """Boundary formula (λ - ξ² + γ²)·u(0)²."""
    return (pair.value - params.xi**2 + params.gamma**2) * pair.at_zero**2


def dlambda_dgamma(params: RobinParams, j: int, pair: EigenPair) -> float:
    """u(0)²; exact for the discrete eigenvalue under the trapezoidal mass."""
    return pair.at_zero**2


def discrete_dlambda_dxi(params: RobinParams, pair: EigenPair) -> float:
    """∫ 2(τ + ξ)u² dτ; the exact ξ-derivative of the discrete eigenvalue."""
    tau = pair.grid.nodes
    return quadrature(pair.grid, 2.0 * (tau + params.xi) * pair.vector**2)


@dataclass(frozen=True)
class DeGennesPoint:
    """Θ(γ) with its minimizer and the curvature of λ¹(γ,·) there."""
    gamma: float
    theta: float
    xi_min: float
    curvature: float
    curvature_unrefined: float = float("nan")

    @property
    def identity_residual(self) -> float:
        """ξ(γ) + √(Θ(γ) + γ²), which vanishes at the exact minimum."""
        return self.xi_min + math.sqrt(max(self.theta + self.gamma**2, 0.0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gamma": self.gamma,
            "theta": self.theta,
            "xi_min": self.xi_min,
            "curvature": self.curvature,
            "curvature_unrefined": self.curvature_unrefined,
            "identity_residual": self.identity_residual,
        }


def de_gennes(
    gamma: float,
    disc: Optional[Discretization] = None,
    scan_step: float = 0.1,
    xtol: float = 1e-10,
    fd_step: float = 1e-3,
) -> DeGennesPoint:
    """
    Minimize ξ ↦ λ¹(γ,ξ).

    The bracket comes from a scan of [-4-|γ|, 2]: λ tends to 1 as ξ → -∞
    and to +∞ as ξ → +∞, so the smallest sample with its neighbors encloses
    the minimum. Brent search then runs on λ and the result is polished on
    the discrete derivative. The curvature is a five-point second
    difference with one Richardson step.

    Args:
        gamma: Robin coefficient
        disc: Discretization options
        scan_step: Bracketing scan step
        xtol: Brent tolerance on ξ
        fd_step: Curvature stencil step

    Returns:
        DeGennesPoint
    """
    if not math.isfinite(gamma):
        raise ParameterError(f"gamma must be finite, got {gamma}", key="gamma")
    disc = disc or Discretization()
    lo = -4.0 - abs(gamma)
    count = int(round((2.0 - lo) / scan_step))
    xs = lo + scan_step * np.arange(count + 1)

    def value(xi: float) -> float:
        return robin_value(gamma, xi, disc)

    def slope(xi: float) -> float:
        params = RobinParams(gamma, xi)
        return discrete_dlambda_dxi(params, robin_eig(params, 1, disc))

    bracket = scan_bracket(value, xs)
    xi_min = minimize_bracketed(value, slope, bracket, xtol=xtol)
    theta = value(xi_min)
    curvature, raw = second_derivative(value, xi_min, fd_step)
    logger.info(f"de Gennes gamma={gamma}: theta={theta:.12g} xi_min={xi_min:.12g} curvature={curvature:.6g}")
    return DeGennesPoint(gamma=float(gamma), theta=theta, xi_min=xi_min, curvature=curvature, curvature_unrefined=raw)


@lru_cache(maxsize=32)
def _de_gennes_zero(disc: Discretization) -> DeGennesPoint:
    return de_gennes(0.0, disc)


def theta0(disc: Optional[Discretization] = None) -> float:
    """De Gennes constant Θ₀ = Θ(0) on the given discretization (cached)."""
    return _de_gennes_zero(disc or Discretization()).theta


def xi0(disc: Optional[Discretization] = None) -> float:
    """Neumann minimizer ξ₀ = ξ(0)."""
    return _de_gennes_zero(disc or Discretization()).xi_min


def neumann_band(xi: float, disc: Optional[Discretization] = None) -> EigenPair:
    """Ground pair of the Neumann model λᴺ(ξ) = λ¹(0,ξ)."""
    return robin_eig(RobinParams(0.0, xi), 1, disc)
