"""
Exception hierarchy for the step-spectra toolkit.

Two families:
- ParameterError: the caller asked for something outside a precondition
  (CLI exit code 1)
- NumericalError: a numerical procedure did not deliver (CLI exit code 2)
"""

from typing import Any, List, Optional, Sequence, Tuple


class SpectraError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(SpectraError, ValueError):
    """Invalid parameters, grids, boundary specs or run configuration."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class NonAttainmentError(ParameterError):
    """The band function has no minimum for the requested field ratio."""

    def __init__(self, a: float):
        super().__init__(
            f"a={a} lies in (0, 1): the band function does not achieve a minimum "
            f"and the step constant equals a (infimum not attained)",
            key="a",
        )
        self.a = a


class NumericalError(SpectraError, RuntimeError):
    """A numerical procedure failed or produced inconsistent output."""


class ConvergenceError(NumericalError):
    """Eigenvalue bisection or inverse iteration did not converge."""

    def __init__(self, message: str, bracket: Optional[Tuple[float, float]] = None):
        if bracket is not None:
            message = f"{message} (last bracket [{bracket[0]:.17g}, {bracket[1]:.17g}])"
        super().__init__(message)
        self.bracket = bracket


class BracketError(NumericalError):
    """A scan failed to isolate exactly one interior minimum."""

    def __init__(self, message: str, trace: Sequence[Tuple[float, float]] = ()):
        super().__init__(message)
        self.trace: List[Tuple[float, float]] = list(trace)


class OrthogonalityError(NumericalError):
    """A right-hand side is not orthogonal to the ground state."""

    def __init__(self, message: str, inner_product: float):
        super().__init__(f"{message} (inner product {inner_product:.3e})")
        self.inner_product = inner_product


class OrderingError(NumericalError):
    """Critical fields are not strictly ordered."""

    def __init__(self, message: str, fields: Any = None):
        super().__init__(message)
        self.fields = fields
