"""
Finite-difference discretization kernels.

Provides:
- Uniform grids with a node at the origin
- Tridiagonal operators -d²/dτ² + V with Dirichlet or Robin-left conditions
- Lowest eigenpairs by Sturm bisection and inverse iteration
- Constrained (bordered) solves on the orthogonal complement of a ground state
- Scan-bracketed Brent minimization with a derivative polish
- Trapezoidal quadrature, one-sided boundary derivatives, finite-difference
  derivative stencils and Richardson refinement over grid spacings

All values are immutable after construction; every function is pure.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.linalg import LinAlgError
from scipy import sparse
from scipy.integrate import trapezoid
from scipy.linalg import eigh_tridiagonal, solve_banded
from scipy.optimize import brentq, minimize_scalar
from scipy.sparse.linalg import spsolve

from step_spectra.errors import (
    BracketError,
    ConvergenceError,
    NumericalError,
    OrthogonalityError,
    ParameterError,
)

logger = logging.getLogger(__name__)

_EPS = float(np.finfo(float).eps)
# Residuals below this multiple of eps·‖A‖ are at the attainable precision.
_RESIDUAL_FLOOR = 64.0

GridFunction = np.ndarray
Weight = Union[float, np.ndarray]


@dataclass(frozen=True)
class Discretization:
    """Grid and solver options shared by all spectral computations."""
    delta: float = 0.005
    margin: float = 12.0
    length: Optional[float] = None
    tol: float = 1e-12
    max_inverse_iterations: int = 50

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ParameterError(f"delta must be positive, got {self.delta}", key="delta")
        if not (math.isfinite(self.margin) and self.margin > 0):
            raise ParameterError(f"margin must be positive, got {self.margin}", key="margin")
        if self.length is not None and not (math.isfinite(self.length) and self.length > 0):
            raise ParameterError(f"length must be positive, got {self.length}", key="length")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}", key="tol")
        if self.max_inverse_iterations < 1:
            raise ParameterError("max_inverse_iterations must be at least 1", key="max_inverse_iterations")

    def refined(self, factor: int = 2) -> "Discretization":
        """Same options on a grid with spacing delta/factor."""
        return replace(self, delta=self.delta / factor)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _cells(extent: float, delta: float) -> int:
    """Number of cells of width delta covering [0, extent]."""
    return max(int(math.ceil(extent / delta - 1e-9)), 0)


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [lo, hi] with n nodes; contains τ=0 whenever lo < 0 < hi."""
    lo: float
    hi: float
    n: int
    delta: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi <= self.lo:
            raise ParameterError(f"invalid grid interval [{self.lo}, {self.hi}]", key="grid")
        if self.n < 3:
            raise ParameterError(f"grid needs at least 3 nodes, got {self.n}", key="grid")
        delta = (self.hi - self.lo) / (self.n - 1)
        object.__setattr__(self, "delta", delta)
        if self.lo < 0 < self.hi:
            k = round(-self.lo / delta)
            if abs(self.lo + k * delta) > 1e-9 * delta:
                raise ParameterError(
                    f"grid [{self.lo}, {self.hi}] with n={self.n} has no node at 0", key="grid"
                )

    @classmethod
    def from_extents(cls, left: float, right: float, delta: float) -> "Grid":
        """Grid on [-left, right] with spacing delta, extents rounded up to whole cells."""
        n_left = _cells(left, delta)
        n_right = _cells(right, delta)
        lo = -n_left * delta if n_left else 0.0
        return cls(lo, n_right * delta, n_left + n_right + 1)

    @classmethod
    def half_line(cls, length: float, delta: float) -> "Grid":
        """Grid on [0, length] with spacing delta."""
        return cls.from_extents(0.0, length, delta)

    @property
    def zero_index(self) -> Optional[int]:
        if self.lo <= 0 <= self.hi:
            return int(round(-self.lo / self.delta))
        return None

    @cached_property
    def nodes(self) -> np.ndarray:
        i0 = self.zero_index
        if i0 is None:
            return self.lo + self.delta * np.arange(self.n)
        return self.delta * (np.arange(self.n) - i0)

    def to_dict(self) -> Dict[str, Any]:
        return {"lo": self.lo, "hi": self.hi, "n": self.n, "delta": self.delta}


class BoundaryKind(str, Enum):
    """Supported boundary-condition combinations."""
    DIRICHLET = "dirichlet"
    ROBIN_LEFT = "robin-left"


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet at both ends, or Robin u'(0)=γu(0) at the left end with Dirichlet at the right."""
    kind: BoundaryKind = BoundaryKind.DIRICHLET
    gamma: float = 0.0

    @classmethod
    def dirichlet(cls) -> "BoundarySpec":
        return cls(BoundaryKind.DIRICHLET)

    @classmethod
    def robin(cls, gamma: float) -> "BoundarySpec":
        return cls(BoundaryKind.ROBIN_LEFT, float(gamma))


@dataclass(frozen=True, eq=False)
class TridiagonalSystem:
    """
    Symmetric tridiagonal matrix acting on the unknowns of a grid.

    Unknown k lives on grid node offset + k; nodes outside the unknown range
    carry homogeneous Dirichlet values.
    """
    diag: np.ndarray
    offdiag: np.ndarray
    grid: Grid
    offset: int = 1

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        offdiag = np.asarray(self.offdiag, dtype=float)
        if diag.ndim != 1 or offdiag.shape != (max(diag.size - 1, 0),):
            raise ParameterError("off-diagonal must have one entry fewer than the diagonal")
        if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(offdiag))):
            raise ParameterError("tridiagonal entries must be finite")
        if self.offset < 0 or self.offset + diag.size > self.grid.n:
            raise ParameterError("unknown range does not fit the grid")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    def norm_inf(self) -> float:
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.offdiag)
        row[1:] += np.abs(self.offdiag)
        return float(row.max())

    def from_grid(self, f: GridFunction) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape == (self.size,):
            return f
        if f.shape != (self.grid.n,):
            raise ParameterError(
                f"grid function has length {f.size}, expected {self.grid.n} or {self.size}"
            )
        return f[self.offset:self.offset + self.size]

    def to_grid(self, x: np.ndarray) -> GridFunction:
        out = np.zeros(self.grid.n)
        out[self.offset:self.offset + self.size] = x
        return out


@dataclass(frozen=True, eq=False)
class GeneralizedSystem:
    """Pencil (A, M) with A tridiagonal and M a positive diagonal mass on the unknowns."""
    stiffness: TridiagonalSystem
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (self.stiffness.size,):
            raise ParameterError(f"mass has length {mass.size}, expected {self.stiffness.size}")
        if not (np.all(np.isfinite(mass)) and np.all(mass > 0)):
            raise ParameterError("mass entries must be finite and strictly positive")
        object.__setattr__(self, "mass", mass)

    @property
    def grid(self) -> Grid:
        return self.stiffness.grid

    @property
    def size(self) -> int:
        return self.stiffness.size


System = Union[TridiagonalSystem, GeneralizedSystem]


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue with its mass-normalized eigenfunction on the full grid."""
    value: float
    vector: GridFunction
    grid: Grid
    residual: float = 0.0

    @property
    def at_zero(self) -> float:
        i0 = self.grid.zero_index
        if i0 is None:
            raise ParameterError("grid has no node at 0")
        return float(self.vector[i0])

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "residual": self.residual, "grid": self.grid.to_dict()}


def _split(system: System) -> Tuple[TridiagonalSystem, np.ndarray]:
    if isinstance(system, GeneralizedSystem):
        return system.stiffness, system.mass
    if isinstance(system, TridiagonalSystem):
        return system, np.ones(system.size)
    raise ParameterError(f"unsupported system type {type(system).__name__}")


def build_fd_operator(
    grid: Grid,
    potential: Callable[[np.ndarray], Any],
    bc: Optional[BoundarySpec] = None,
) -> System:
    """
    Discretize -d²/dτ² + V by second-order central differences.

    Dirichlet ends are realized by dropping the boundary nodes. The Robin
    condition u'(0)=γu(0) eliminates the ghost node u₋₁ = u₁ - 2δγu₀; the
    resulting node-0 row is halved, which gives a symmetric stiffness with
    the trapezoidal mass (½, 1, 1, ...). Robin systems are therefore returned
    as GeneralizedSystem.

    Args:
        grid: Discretization grid
        potential: Vectorized τ ↦ V(τ)
        bc: Boundary specification (Dirichlet at both ends by default)

    Returns:
        TridiagonalSystem (Dirichlet) or GeneralizedSystem (Robin-left)
    """
    bc = bc or BoundarySpec.dirichlet()
    tau = grid.nodes
    values = np.broadcast_to(np.asarray(potential(tau), dtype=float), tau.shape)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise ParameterError(f"potential is not finite at node {i} (tau={tau[i]:.17g})", key="potential")

    inv = 1.0 / grid.delta**2
    if bc.kind is BoundaryKind.DIRICHLET:
        v = values[1:-1]
        diag = 2.0 * inv + v
        offdiag = np.full(v.size - 1, -inv)
        return TridiagonalSystem(diag, offdiag, grid, offset=1)

    if bc.kind is BoundaryKind.ROBIN_LEFT:
        if grid.lo != 0.0:
            raise ParameterError(f"Robin-left condition requires grid.lo = 0, got {grid.lo}", key="bc")
        if not math.isfinite(bc.gamma):
            raise ParameterError(f"Robin coefficient must be finite, got {bc.gamma}", key="gamma")
        v = values[:-1]
        diag = 2.0 * inv + v
        diag[0] = inv + bc.gamma / grid.delta + 0.5 * v[0]
        offdiag = np.full(v.size - 1, -inv)
        mass = np.ones(v.size)
        mass[0] = 0.5
        return GeneralizedSystem(TridiagonalSystem(diag, offdiag, grid, offset=0), mass)

    raise ParameterError(f"unsupported boundary condition {bc.kind!r}", key="bc")


def _gershgorin(d: np.ndarray, e: np.ndarray) -> Tuple[float, float]:
    radius = np.zeros_like(d)
    radius[:-1] += np.abs(e)
    radius[1:] += np.abs(e)
    return float(np.min(d - radius)), float(np.max(d + radius))


def _mass_norm(x: np.ndarray, mass: np.ndarray, delta: float) -> float:
    return float(np.sqrt(delta * np.sum(mass * x * x)))


def _residual(stiffness: TridiagonalSystem, mass: np.ndarray, value: float, x: np.ndarray) -> float:
    r = stiffness.matvec(x) - value * mass * x
    return float(np.sqrt(stiffness.grid.delta * np.sum(r * r / mass)))


def _fix_sign(x: np.ndarray, stiffness: TridiagonalSystem) -> np.ndarray:
    i0 = stiffness.grid.zero_index
    peak = float(np.max(np.abs(x)))
    if i0 is not None and 0 <= i0 - stiffness.offset < x.size:
        at_zero = x[i0 - stiffness.offset]
        if abs(at_zero) > 1e-8 * peak:
            return x if at_zero > 0 else -x
    return x if x[int(np.argmax(np.abs(x)))] > 0 else -x


def _inverse_iteration(
    stiffness: TridiagonalSystem,
    mass: np.ndarray,
    value: float,
    x: np.ndarray,
    previous: Sequence[np.ndarray],
    limit: float,
    max_iterations: int,
) -> Tuple[float, np.ndarray, float]:
    delta = stiffness.grid.delta
    ab = np.zeros((3, stiffness.size))
    ab[0, 1:] = stiffness.offdiag
    ab[1] = stiffness.diag - value * mass
    ab[2, :-1] = stiffness.offdiag
    nudge = _RESIDUAL_FLOOR * _EPS * stiffness.norm_inf()
    residual = math.inf
    for iteration in range(1, max_iterations + 1):
        try:
            y = solve_banded((1, 1), ab, mass * x)
        except LinAlgError:
            ab[1] -= nudge * mass
            continue
        for p in previous:
            y -= delta * np.sum(mass * p * y) * p
        y /= _mass_norm(y, mass, delta)
        x = y
        value = float(delta * np.dot(x, stiffness.matvec(x)))
        residual = _residual(stiffness, mass, value, x)
        logger.debug(f"inverse iteration {iteration}: value={value:.15g} residual={residual:.3e}")
        if residual <= limit:
            return value, x, residual
    raise ConvergenceError(
        f"inverse iteration did not converge in {max_iterations} steps (residual {residual:.3e})",
        bracket=(value - residual, value + residual),
    )


def eigs_smallest(
    system: System,
    k: int = 1,
    tol: float = 1e-12,
    max_iterations: int = 50,
) -> List[EigenPair]:
    """
    Compute the k lowest eigenpairs of a tridiagonal system or pencil.

    Eigenvalues come from Sturm-sequence bisection and eigenvectors from
    inverse iteration (LAPACK stebz/stein). A pencil (A, M) is first reduced
    by the similarity M^{-1/2} A M^{-1/2}, which stays tridiagonal. Pairs
    whose residual misses the tolerance are polished by further inverse
    iteration, re-orthogonalized against the lower pairs.

    Args:
        system: TridiagonalSystem or GeneralizedSystem
        k: Number of eigenpairs (1 <= k < size)
        tol: Absolute bisection tolerance on eigenvalues
        max_iterations: Cap on polishing inverse-iteration steps

    Returns:
        EigenPairs in strictly increasing order of value
    """
    stiffness, mass = _split(system)
    size = stiffness.size
    if not 1 <= k < size:
        raise ParameterError(f"k must satisfy 1 <= k < {size}, got {k}", key="k")
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}", key="tol")

    scale = 1.0 / np.sqrt(mass)
    d = stiffness.diag * scale**2
    e = stiffness.offdiag * scale[:-1] * scale[1:]
    try:
        values, vectors = eigh_tridiagonal(
            d, e, select="i", select_range=(0, k - 1), lapack_driver="stebz", tol=tol
        )
    except LinAlgError as exc:
        raise ConvergenceError(f"tridiagonal eigensolve failed: {exc}", bracket=_gershgorin(d, e)) from exc

    delta = stiffness.grid.delta
    floor = _RESIDUAL_FLOOR * _EPS * stiffness.norm_inf() / float(mass.min())
    pairs: List[EigenPair] = []
    accepted: List[np.ndarray] = []
    for j in range(values.size):
        value = float(values[j])
        x = scale * vectors[:, j]
        x = _fix_sign(x / _mass_norm(x, mass, delta), stiffness)
        limit = max(tol, floor) * (1.0 + abs(value))
        residual = _residual(stiffness, mass, value, x)
        if residual > limit:
            logger.debug(f"polishing eigenpair {j}: residual {residual:.3e} > {limit:.3e}")
            value, x, residual = _inverse_iteration(
                stiffness, mass, value, x, accepted, limit, max_iterations
            )
            x = _fix_sign(x, stiffness)
        accepted.append(x)
        pairs.append(EigenPair(value=value, vector=stiffness.to_grid(x), grid=stiffness.grid, residual=residual))

    computed = np.array([p.value for p in pairs])
    if np.any(np.diff(computed) <= 0):
        raise NumericalError(f"eigenvalues are not strictly increasing: {computed}")
    return pairs


def constrained_solve(
    system: System,
    shift: float,
    mass: Optional[np.ndarray],
    rhs: GridFunction,
    phi: GridFunction,
    tol: float = 1e-8,
) -> GridFunction:
    """
    Solve (A - shift·M)x = M·rhs subject to ⟨x, phi⟩_M = 0.

    rhs is a grid function (the right-hand side of the continuous equation),
    so it enters multiplied by the mass. The singular shifted operator is
    bordered by M·phi and solved with a sparse LU factorization. When rhs
    is parallel to phi the result is the zero function.

    Raises:
        OrthogonalityError: if rhs has a component along phi beyond tol·‖rhs‖
    """
    stiffness, m = _split(system)
    if mass is not None:
        m = np.asarray(mass, dtype=float)
        if m.shape != (stiffness.size,):
            m = stiffness.from_grid(m)
    delta = stiffness.grid.delta
    f = stiffness.from_grid(rhs)
    p = stiffness.from_grid(phi)

    p_norm = _mass_norm(p, m, delta)
    if p_norm == 0.0:
        raise ParameterError("phi vanishes identically", key="phi")
    p = p / p_norm
    f_norm = _mass_norm(f, m, delta)
    if f_norm == 0.0:
        return np.zeros(stiffness.grid.n)
    inner = float(delta * np.sum(m * f * p))
    if _mass_norm(f - inner * p, m, delta) <= 1e-12 * f_norm:
        return np.zeros(stiffness.grid.n)
    if abs(inner) > tol * f_norm:
        raise OrthogonalityError("right-hand side is not orthogonal to phi", inner)

    core = sparse.diags(
        [stiffness.offdiag, stiffness.diag - shift * m, stiffness.offdiag], [-1, 0, 1], format="csc"
    )
    w = (m * p)[:, None]
    bordered = sparse.bmat(
        [[core, sparse.csc_matrix(w)], [sparse.csc_matrix(w.T), None]], format="csc"
    )
    solution = spsolve(bordered, np.concatenate([m * f, [0.0]]))
    x = np.asarray(solution[:stiffness.size], dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericalError("bordered solve produced non-finite values")
    return stiffness.to_grid(x)


def _check_length(grid: Grid, f: np.ndarray, name: str) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise ParameterError(f"{name} has length {f.size}, grid has {grid.n} nodes", key=name)
    return f


def _weight_values(grid: Grid, weight: Optional[Weight], name: str) -> np.ndarray:
    if weight is None:
        return np.ones(grid.n)
    if np.ndim(weight) == 0:
        return np.full(grid.n, float(weight))
    return _check_length(grid, weight, name)


def quadrature(
    grid: Grid,
    f: GridFunction,
    weight: Optional[Weight] = None,
    left_weight: Optional[Weight] = None,
) -> float:
    """
    Trapezoidal rule for ∫ f·weight dτ over the grid.

    With left_weight, the weight jumps at τ=0: the integral is split into
    [lo, 0] (using left_weight) and [0, hi] (using weight), each with its
    one-sided value at the node 0.
    """
    f = _check_length(grid, f, "f")
    w = _weight_values(grid, weight, "weight")
    if left_weight is None:
        return float(trapezoid(f * w, dx=grid.delta))
    i0 = grid.zero_index
    if i0 is None or i0 == 0:
        raise ParameterError("split quadrature needs a node at 0 inside the grid")
    wl = _weight_values(grid, left_weight, "left_weight")
    left = trapezoid(f[:i0 + 1] * wl[:i0 + 1], dx=grid.delta)
    right = trapezoid(f[i0:] * w[i0:], dx=grid.delta)
    return float(left + right)


def inner_product(grid: Grid, f: GridFunction, g: GridFunction, weight: Optional[Weight] = None) -> float:
    """L² inner product by the trapezoidal rule."""
    return quadrature(grid, np.asarray(f) * np.asarray(g), weight)


def l2_norm(grid: Grid, f: GridFunction, weight: Optional[Weight] = None) -> float:
    return math.sqrt(max(quadrature(grid, np.asarray(f) ** 2, weight), 0.0))


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


def derivative_at_zero(grid: Grid, f: GridFunction, side: Union[Side, str] = Side.RIGHT) -> float:
    """One-sided second-order three-point derivative at the node τ=0."""
    f = _check_length(grid, f, "f")
    side = Side(side)
    i0 = grid.zero_index
    if i0 is None:
        raise ParameterError("grid has no node at 0")
    if side is Side.RIGHT:
        if i0 + 2 >= grid.n:
            raise ParameterError("need at least 3 nodes on the right of 0", key="side")
        return float((-3.0 * f[i0] + 4.0 * f[i0 + 1] - f[i0 + 2]) / (2.0 * grid.delta))
    if i0 - 2 < 0:
        raise ParameterError("need at least 3 nodes on the left of 0", key="side")
    return float((3.0 * f[i0] - 4.0 * f[i0 - 1] + f[i0 - 2]) / (2.0 * grid.delta))


def is_single_signed(vector: GridFunction, rel_floor: float = 1e-10) -> bool:
    """True when every entry above rel_floor·max|v| is positive (after sign fixing)."""
    v = np.asarray(vector, dtype=float)
    peak = float(np.max(np.abs(v)))
    significant = v[np.abs(v) > rel_floor * peak]
    return bool(significant.size) and float(significant.min()) * float(significant.max()) > 0


def central_difference(fn: Callable[[float], float], x: float, step: float) -> float:
    return (fn(x + step) - fn(x - step)) / (2.0 * step)


def second_derivative(fn: Callable[[float], float], x: float, step: float) -> Tuple[float, float]:
    """
    Five-point second derivative with one Richardson step.

    Returns:
        (refined value, five-point value at `step`)
    """
    cache: Dict[int, float] = {}

    def f(k: int) -> float:
        if k not in cache:
            cache[k] = fn(x + k * step)
        return cache[k]

    def five_point(s: int) -> float:
        h = s * step
        return (-f(2 * s) + 16.0 * f(s) - 30.0 * f(0) + 16.0 * f(-s) - f(-2 * s)) / (12.0 * h * h)

    fine = five_point(1)
    coarse = five_point(2)
    return (16.0 * fine - coarse) / 15.0, fine


def richardson(values: Sequence[Any], deltas: Sequence[float], exponents: Sequence[int] = (2, 3)) -> Any:
    """
    Extrapolate values computed on spacings `deltas` to zero spacing.

    Assumes value(δ) = v₀ + Σ c_p δ^p over the given exponents; needs
    exactly len(exponents) + 1 levels. Works component-wise on arrays.
    """
    deltas = np.asarray(deltas, dtype=float)
    data = np.asarray(values, dtype=float)
    if deltas.size != len(exponents) + 1 or data.shape[0] != deltas.size:
        raise ParameterError(
            f"richardson needs {len(exponents) + 1} levels, got {deltas.size}", key="levels"
        )
    vander = np.column_stack([np.ones_like(deltas)] + [deltas**p for p in exponents])
    coeffs = np.linalg.solve(vander, data.reshape(deltas.size, -1))
    result = coeffs[0].reshape(data.shape[1:])
    return float(result) if result.ndim == 0 else result


def observed_order(values: Sequence[float], ratio: float = 2.0) -> float:
    """Convergence order from three successive refinements; nan when undetermined."""
    v = np.asarray(values, dtype=float)
    e1, e2 = abs(v[0] - v[1]), abs(v[1] - v[2])
    if e1 == 0.0 or e2 == 0.0:
        return float("nan")
    return math.log(e1 / e2) / math.log(ratio)


@dataclass
class Refinement:
    """Values of a quantity on successively halved grids and their extrapolation."""
    deltas: List[float]
    values: np.ndarray
    extrapolated: Any
    order: Any

    def to_dict(self) -> Dict[str, Any]:
        extrapolated = np.asarray(self.extrapolated, dtype=float)
        return {
            "deltas": list(self.deltas),
            "values": np.asarray(self.values, dtype=float).tolist(),
            "extrapolated": extrapolated.tolist(),
            "order": np.asarray(self.order, dtype=float).tolist(),
        }


def refine(fn: Callable[[Discretization], Any], disc: Discretization, levels: int = 3) -> Refinement:
    """
    Evaluate fn on spacings δ, δ/2, δ/4 and Richardson-extrapolate.

    fn returns a float or a sequence of floats; the extrapolation and the
    observed order are computed per component.
    """
    if levels != 3:
        raise ParameterError("refine uses exactly three levels", key="levels")
    discs = [disc.refined(2**k) for k in range(levels)]
    values = np.asarray([np.asarray(fn(d), dtype=float) for d in discs])
    deltas = [d.delta for d in discs]
    extrapolated = richardson(values, deltas)
    flat = values.reshape(levels, -1)
    orders = np.array([observed_order(flat[:, c]) for c in range(flat.shape[1])])
    order = float(orders[0]) if values.ndim == 1 else orders.reshape(values.shape[1:])
    logger.debug(f"refinement over deltas {deltas}: order {order}")
    return Refinement(deltas=deltas, values=values, extrapolated=extrapolated, order=order)


@dataclass
class ScanBracket:
    """Three scan samples around the smallest sampled value."""
    lo: float
    mid: float
    hi: float
    trace: List[Tuple[float, float]]
    flat_tol: float = 1e-9

    @property
    def value(self) -> float:
        return dict(self.trace)[self.mid]

    @property
    def local_minima(self) -> int:
        """Local minima of the scan trace (0 for a bracket built without a scan)."""
        return count_local_minima([v for _, v in self.trace], self.flat_tol)


def count_local_minima(values: Sequence[float], flat_tol: float = 1e-9) -> int:
    """Strict sign changes - to + of the differences above flat_tol."""
    diffs = np.diff(np.asarray(values, dtype=float))
    signs = [int(np.sign(d)) for d in diffs if abs(d) > flat_tol]
    return sum(1 for s, t in zip(signs, signs[1:]) if s < 0 < t)


def scan_bracket(
    fn: Callable[[float], float],
    xs: Sequence[float],
    flat_tol: float = 1e-9,
) -> ScanBracket:
    """
    Bracket the unique interior minimum of fn sampled at xs.

    Consecutive differences below flat_tol count as flat, so regions where
    fn has converged to its limit to machine precision do not register as
    extra dips.

    Raises:
        BracketError: minimum at a scan end or more than one local minimum
    """
    xs = [float(x) for x in xs]
    values = [float(fn(x)) for x in xs]
    trace = list(zip(xs, values))
    i = int(np.argmin(values))
    if i == 0 or i == len(xs) - 1:
        raise BracketError(f"no interior dip on [{xs[0]}, {xs[-1]}] (smallest sample at {xs[i]})", trace)
    minima = count_local_minima(values, flat_tol)
    if minima != 1:
        raise BracketError(f"expected one local minimum on [{xs[0]}, {xs[-1]}], found {minima}", trace)
    logger.debug(f"scan bracket [{xs[i - 1]}, {xs[i + 1]}] around {xs[i]} value {values[i]:.12g}")
    return ScanBracket(xs[i - 1], xs[i], xs[i + 1], trace, flat_tol)


def minimize_bracketed(
    value_fn: Callable[[float], float],
    slope_fn: Optional[Callable[[float], float]],
    bracket: ScanBracket,
    xtol: float = 1e-10,
) -> float:
    """
    Bounded Brent minimization inside the bracket, then a Brent root polish
    on slope_fn when it changes sign across the bracket.

    The value-only search resolves the minimizer only to about
    √(eigenvalue precision / curvature); the slope polish removes that floor.
    """
    result = minimize_scalar(
        value_fn, bounds=(bracket.lo, bracket.hi), method="bounded", options={"xatol": xtol}
    )
    if not result.success:
        raise ConvergenceError(f"Brent minimization failed: {result.message}", bracket=(bracket.lo, bracket.hi))
    x = float(result.x)
    if slope_fn is not None:
        s_lo, s_hi = slope_fn(bracket.lo), slope_fn(bracket.hi)
        if s_lo < 0.0 < s_hi:
            x = float(brentq(slope_fn, bracket.lo, bracket.hi, xtol=1e-14, rtol=4 * _EPS))
        else:
            logger.warning(
                f"slope does not change sign on [{bracket.lo}, {bracket.hi}] "
                f"({s_lo:.3e}, {s_hi:.3e}); keeping the value-only minimizer"
            )
    logger.debug(f"minimizer {x:.15g} after {result.nfev} value evaluations")
    return x


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log|y| against log x."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ParameterError("log-log fit needs at least two positive samples", key="fit")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)
