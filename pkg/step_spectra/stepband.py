"""
Whole-line step fiber model.

The fiber operator is -d²/dτ² + (ξ + σ(τ)τ)² on the real line, with
σ = 1 on τ > 0 and σ = a on τ < 0. This module builds its potential,
computes the band μₐ(ξ) (lowest eigenvalue) with the second band, the
ground-state traces at the jump, and the analytic band derivative.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from step_spectra.errors import ParameterError, SpectraError
from step_spectra.specdisc import (
    Discretization,
    EigenPair,
    Grid,
    Side,
    build_fd_operator,
    derivative_at_zero,
    eigs_smallest,
    quadrature,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepParams:
    """Field ratio a of the step, a ∈ [-1, 1) and a ≠ 0."""
    a: float

    def __post_init__(self):
        a = float(self.a)
        if not math.isfinite(a) or not -1.0 <= a < 1.0 or a == 0.0:
            raise ParameterError(f"a must lie in [-1, 1) and be non-zero, got {self.a}", key="a")
        object.__setattr__(self, "a", a)

    def sigma(self, tau: np.ndarray) -> np.ndarray:
        """Step profile; the node τ=0 takes σ=1."""
        return sigma(self.a, tau)


def sigma(a: float, tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    return np.where(tau < 0, a, 1.0)


def step_potential(params: StepParams, xi: float) -> Callable[[np.ndarray], np.ndarray]:
    """Return τ ↦ (ξ + σ(τ)τ)²."""
    a = params.a

    def potential(tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return (xi + sigma(a, tau) * tau) ** 2

    return potential


def step_grid(params: StepParams, xi: float, disc: Discretization) -> Grid:
    """
    Truncation box for the fiber at ξ.

    Right extent |ξ| + L covers the well at τ = -ξ; left extent
    |ξ|/|a| + L/√|a| covers the well at τ = -ξ/a, whose width scales
    like 1/√|a|. A fixed disc.length gives the symmetric box instead.
    """
    if disc.length is not None:
        return Grid.from_extents(disc.length, disc.length, disc.delta)
    abs_a = abs(params.a)
    left = abs(xi) / abs_a + disc.margin / math.sqrt(abs_a)
    right = abs(xi) + disc.margin
    return Grid.from_extents(left, right, disc.delta)


@dataclass(frozen=True, eq=False)
class BandPoint:
    """Band value and ground-state traces at one ξ."""
    xi: float
    mu: float
    phi0: float                 # φ(0) > 0
    dphi0_left: float           # one-sided φ'(0-)
    dphi0_right: float          # one-sided φ'(0+)
    gamma: float                # Robin trace φ'(0)/φ(0)
    grid: Grid
    vector: np.ndarray = field(repr=False)
    mu_second: Optional[float] = None
    dmu: float = 0.0            # discrete Feynman-Hellmann derivative of mu

    def to_dict(self) -> Dict[str, Any]:
        return {
            "xi": self.xi,
            "mu": self.mu,
            "mu2": self.mu_second,
            "phi0": self.phi0,
            "dphi0_left": self.dphi0_left,
            "dphi0_right": self.dphi0_right,
            "gamma": self.gamma,
            "dmu": self.dmu,
        }


def discrete_band_derivative(params: StepParams, xi: float, grid: Grid, phi: np.ndarray) -> float:
    """∫ 2(ξ + στ)φ² dτ; the exact ξ-derivative of the discrete eigenvalue."""
    tau = grid.nodes
    return quadrature(grid, 2.0 * (xi + sigma(params.a, tau) * tau) * phi**2)


def band_point(
    params: StepParams,
    xi: float,
    disc: Optional[Discretization] = None,
    second: bool = True,
) -> BandPoint:
    """
    Solve the fiber operator at ξ on its truncation box.

    Args:
        params: Step parameters
        xi: Fourier variable
        disc: Discretization options (defaults when None)
        second: Also compute the second band

    Returns:
        BandPoint with the positive normalized ground state
    """
    if not math.isfinite(xi):
        raise ParameterError(f"xi must be finite, got {xi}", key="xi")
    disc = disc or Discretization()
    grid = step_grid(params, xi, disc)
    system = build_fd_operator(grid, step_potential(params, xi))
    pairs = eigs_smallest(system, k=2 if second else 1, tol=disc.tol, max_iterations=disc.max_inverse_iterations)
    ground = pairs[0]
    phi = ground.vector
    phi0 = ground.at_zero
    right = derivative_at_zero(grid, phi, Side.RIGHT)
    left = derivative_at_zero(grid, phi, Side.LEFT)
    logger.debug(f"band point a={params.a} xi={xi:.6g}: n={grid.n} mu={ground.value:.15g}")
    return BandPoint(
        xi=float(xi),
        mu=ground.value,
        phi0=phi0,
        dphi0_left=left,
        dphi0_right=right,
        gamma=right / phi0,
        grid=grid,
        vector=phi,
        mu_second=pairs[1].value if second else None,
        dmu=discrete_band_derivative(params, xi, grid, phi),
    )


def band_value(params: StepParams, xi: float, disc: Discretization) -> float:
    """Lowest eigenvalue only."""
    grid = step_grid(params, xi, disc)
    system = build_fd_operator(grid, step_potential(params, xi))
    return eigs_smallest(system, k=1, tol=disc.tol, max_iterations=disc.max_inverse_iterations)[0].value


def band_ground_state(params: StepParams, xi: float, disc: Discretization) -> Tuple[EigenPair, float]:
    """Ground pair with its discrete ξ-derivative."""
    grid = step_grid(params, xi, disc)
    system = build_fd_operator(grid, step_potential(params, xi))
    pair = eigs_smallest(system, k=1, tol=disc.tol, max_iterations=disc.max_inverse_iterations)[0]
    return pair, discrete_band_derivative(params, xi, grid, pair.vector)


@dataclass
class BandCurve:
    """Samples of the band over a list of ξ, in input order."""
    params: StepParams
    points: List[BandPoint] = field(default_factory=list)
    failures: List[Tuple[float, str]] = field(default_factory=list)

    def __iter__(self) -> Iterator[BandPoint]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, index: int) -> BandPoint:
        return self.points[index]

    @property
    def xi(self) -> np.ndarray:
        return np.array([p.xi for p in self.points])

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.points])

    def to_frame(self) -> pd.DataFrame:
        rows = [p.to_dict() for p in self.points]
        for row in rows:
            row["mu_prime"] = mu_prime_analytic_from(row, self.params)
        columns = ["xi", "mu", "mu2", "phi0", "dphi0_left", "dphi0_right", "gamma", "dmu", "mu_prime"]
        return pd.DataFrame(rows, columns=columns)


def band_curve(
    params: StepParams,
    xi_values: Sequence[float],
    disc: Optional[Discretization] = None,
    workers: int = 1,
) -> BandCurve:
    """
    Sample the band at every ξ, in parallel when workers > 1.

    Failed points are collected with their ξ; the remaining points are
    returned in input order.
    """
    disc = disc or Discretization()
    xi_list = [float(x) for x in xi_values]
    bad = [x for x in xi_list if not math.isfinite(x)]
    if bad:
        raise ParameterError(f"xi values must be finite, got {bad[0]}", key="xi")

    logger.info(f"Sampling band for a={params.a} at {len(xi_list)} points (workers={workers})")
    results: Dict[int, BandPoint] = {}
    failures: Dict[int, Tuple[float, str]] = {}

    if workers <= 1:
        for i, xi in enumerate(xi_list):
            try:
                results[i] = band_point(params, xi, disc)
            except SpectraError as e:
                failures[i] = (xi, str(e))
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(band_point, params, xi, disc): i for i, xi in enumerate(xi_list)}
            for future in as_completed(futures):
                i = futures[future]
                try:
                    results[i] = future.result()
                except SpectraError as e:
                    failures[i] = (xi_list[i], str(e))

    for i in sorted(failures):
        logger.warning(f"band point failed at xi={failures[i][0]}: {failures[i][1]}")
    return BandCurve(
        params=params,
        points=[results[i] for i in sorted(results)],
        failures=[failures[i] for i in sorted(failures)],
    )


def mu_prime_analytic(point: BandPoint, params: StepParams) -> float:
    """(1 - 1/a)·(φ'(0)² + (μ - ξ²)·φ(0)²) with the right-hand trace."""
    return (1.0 - 1.0 / params.a) * (
        point.dphi0_right**2 + (point.mu - point.xi**2) * point.phi0**2
    )


def mu_prime_analytic_from(row: Dict[str, Any], params: StepParams) -> float:
    return (1.0 - 1.0 / params.a) * (
        row["dphi0_right"] ** 2 + (row["mu"] - row["xi"] ** 2) * row["phi0"] ** 2
    )


def spectral_gap(point: BandPoint) -> float:
    """Distance from the band to the second band at the same ξ."""
    if point.mu_second is None:
        raise ParameterError("band point was computed without the second band", key="second")
    return point.mu_second - point.mu


@dataclass
class BandLimits:
    """Samples witnessing the behavior of the band at ±∞."""
    a: float
    flat_xi: List[float]
    flat_values: List[float]
    flat_target: float
    far_xi: List[float]
    far_values: List[float]
    far_target: Optional[float]        # None means +∞
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def flat_gaps(self) -> List[float]:
        return [v - self.flat_target for v in self.flat_values]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.a,
            "flat_xi": self.flat_xi,
            "flat_values": self.flat_values,
            "flat_target": self.flat_target,
            "far_xi": self.far_xi,
            "far_values": self.far_values,
            "far_target": self.far_target,
            "checks": dict(self.checks),
        }


# An oscillator ground state of frequency |a| is biased by -a²δ²/24 on the grid.
_LIMIT_SLACK = 1e-6
_LIMIT_BAND = 1e-2


def band_limits(params: StepParams, disc: Optional[Discretization] = None) -> BandLimits:
    """
    Sample the band where it approaches |a| and where it leaves it.

    For a < 0 the band tends to |a| as ξ → -∞ and to +∞ as ξ → +∞,
    sampled at ξ ∈ {-4, -6, -8} and {2, 4, 6}. For a ∈ (0, 1) the only
    well at large ξ > 0 sits on τ < 0, so the band tends to a as ξ → +∞
    (sampled at {4, 6, 8}) and to 1 as ξ → -∞ (sampled at {-4, -6, -8}).
    """
    disc = disc or Discretization()
    a = params.a
    if a < 0:
        flat_xi, far_xi, far_target = [-4.0, -6.0, -8.0], [2.0, 4.0, 6.0], None
    else:
        flat_xi, far_xi, far_target = [4.0, 6.0, 8.0], [-4.0, -6.0, -8.0], 1.0
    flat = [band_value(params, x, disc) for x in flat_xi]
    far = [band_value(params, x, disc) for x in far_xi]
    target = abs(a)
    limits = BandLimits(a, flat_xi, flat, target, far_xi, far, far_target)
    slack = _LIMIT_SLACK + a * a * disc.delta**2 / 12.0
    limits.checks["flat_side_near_abs_a"] = all(-slack < g < _LIMIT_BAND for g in limits.flat_gaps)
    if far_target is None:
        limits.checks["far_side_increasing"] = bool(np.all(np.diff(far) > 0))
        limits.checks["far_side_above_abs_a"] = all(v > target for v in far)
    else:
        limits.checks["far_side_near_one"] = all(abs(v - far_target) < _LIMIT_BAND for v in far)
    for name, ok in limits.checks.items():
        if not ok:
            logger.warning(f"band limit check '{name}' failed for a={a}")
    return limits
