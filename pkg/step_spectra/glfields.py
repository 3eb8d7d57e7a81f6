"""
Ginzburg-Landau critical fields for the step magnetic field.

Given Θ₀ and βₐ, the three critical ratios are

    b_{c,1} = max(1/|a|, 1/Θ₀),  b_{c,2} = 1/βₐ,  b_{c,3} = 1/(|a|Θ₀),

and the regime of a field ratio b is read off which boundary and edge
contributions vanish. Thresholds are inclusive.
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from step_spectra.errors import OrderingError, ParameterError

logger = logging.getLogger(__name__)


class Regime(str, Enum):
    """
    Which contributions survive at a field ratio b.

    EDGE_AND_BOUNDARY for b < bc1, EDGE_AND_GAMMA2 for bc1 ≤ b < bc2,
    GAMMA2_ONLY for bc2 ≤ b < bc3 and NORMAL for b ≥ bc3.
    """
    EDGE_AND_BOUNDARY = "edge-and-boundary"
    EDGE_AND_GAMMA2 = "edge-and-gamma2"
    GAMMA2_ONLY = "gamma2-only"
    NORMAL = "normal"


@dataclass(frozen=True)
class CriticalFields:
    a: float
    bc1: float
    bc2: float
    bc3: float
    theta0: float
    beta_a: float
    degenerate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class RegimeRecord:
    """Vanishing flags of the weak-field bulk, the edge term and the two boundary terms."""
    b: float
    bulk_vanishes: bool
    edge_vanishes: bool
    boundary1_vanishes: bool
    boundary2_vanishes: bool

    @property
    def regime(self) -> Regime:
        if self.edge_vanishes and self.boundary1_vanishes and self.boundary2_vanishes:
            return Regime.NORMAL
        if self.edge_vanishes:
            return Regime.GAMMA2_ONLY
        # b ≥ bc1 = max(1/|a|, 1/Θ₀)
        if self.bulk_vanishes and self.boundary1_vanishes:
            return Regime.EDGE_AND_GAMMA2
        return Regime.EDGE_AND_BOUNDARY

    @property
    def surviving(self) -> List[str]:
        names = []
        if not self.bulk_vanishes:
            names.append("bulk")
        if not self.edge_vanishes:
            names.append("edge")
        if not self.boundary1_vanishes:
            names.append("boundary1")
        if not self.boundary2_vanishes:
            names.append("boundary2")
        return names

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["regime"] = self.regime.value
        return data


def critical_fields(a: float, theta0: float, beta_a: float) -> CriticalFields:
    """
    Critical ratios for a ∈ [-1, 0).

    At a = -1 all three collapse to 1/Θ₀; the record is marked degenerate
    and the strict ordering is not required.

    Raises:
        OrderingError: bc1 < bc2 < bc3 fails for a ∈ (-1, 0)
    """
    if not -1.0 <= a < 0.0:
        raise ParameterError(f"critical fields need a in [-1, 0), got {a}", key="a")
    if not (theta0 > 0 and beta_a > 0):
        raise ParameterError("theta0 and beta_a must be positive", key="beta_a")
    abs_a = abs(a)
    fields = CriticalFields(
        a=a,
        bc1=max(1.0 / abs_a, 1.0 / theta0),
        bc2=1.0 / beta_a,
        bc3=1.0 / (abs_a * theta0),
        theta0=theta0,
        beta_a=beta_a,
        degenerate=(a == -1.0),
    )
    if fields.degenerate:
        logger.warning("a=-1: critical fields coincide at 1/theta0, ordering check waived")
        return fields
    if not fields.bc1 < fields.bc2 < fields.bc3:
        raise OrderingError(
            f"critical fields out of order for a={a}: bc1={fields.bc1:.12g} "
            f"bc2={fields.bc2:.12g} bc3={fields.bc3:.12g}",
            fields,
        )
    return fields


def classify(fields: CriticalFields, b: float) -> RegimeRecord:
    """
    Bulk of the weak-field side vanishes iff b|a| ≥ 1; edge term iff b ≥ bc2;
    Γ₁ term iff b ≥ 1/Θ₀; Γ₂ term iff b|a| ≥ 1/Θ₀.
    """
    if not b > 0:
        raise ParameterError(f"b must be positive, got {b}", key="b")
    return RegimeRecord(
        b=b,
        bulk_vanishes=b >= 1.0 / abs(fields.a),
        edge_vanishes=b >= fields.bc2,
        boundary1_vanishes=b >= 1.0 / fields.theta0,
        boundary2_vanishes=b >= fields.bc3,
    )


def regime_table(fields: CriticalFields, b_values: Optional[Sequence[float]] = None) -> pd.DataFrame:
    """Classify b at and around each threshold (±1e-9 relative)."""
    if b_values is None:
        b_values = []
        for bc in (fields.bc1, fields.bc2, fields.bc3):
            b_values.extend([bc * (1 - 1e-9), bc, bc * (1 + 1e-9)])
        b_values = sorted(b_values)
    return pd.DataFrame([classify(fields, b).to_dict() for b in b_values])
