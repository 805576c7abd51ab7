"""Newton-Cotes integration on uniform grids.

Provides the composite trapezoid rule, its cumulative (prefix) form used to
evaluate running integrals at every collocation point in one pass, and a
single three-point Simpson rule for short intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TRAPEZOID = "trapezoid"
SIMPSON = "simpson"


@dataclass(frozen=True)
class QuadratureRule:
    """Integration rule selector.

    ``trapezoid`` is the composite rule on a uniform grid of ``points``
    nodes.  ``simpson`` is the fixed three-evaluation rule (endpoints plus
    midpoint); ``points`` is ignored for it.
    """

    kind: str = TRAPEZOID
    points: int = 101

    def __post_init__(self):
        if self.kind not in (TRAPEZOID, SIMPSON):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.kind == TRAPEZOID and self.points < 2:
            raise ValueError("trapezoid rule needs at least 2 points")


@dataclass(frozen=True)
class UniformGrid:
    """Equispaced nodes x_i = start + i * spacing, i = 0..count-1."""

    start: float
    end: float
    count: int
    spacing: float = field(init=False)

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("grid needs at least 2 points")
        if not self.end > self.start:
            raise ValueError("grid end must exceed start")
        object.__setattr__(self, "spacing", (self.end - self.start) / (self.count - 1))

    def nodes(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.count)


def trapezoid(values, spacing: float) -> float:
    """Composite trapezoid rule: (dx/2) * (h_0 + 2*sum(h_i) + h_p).

    Exact for affine integrands.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("trapezoid needs at least 2 samples")
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    return float(spacing * (0.5 * (values[0] + values[-1]) + values[1:-1].sum()))


def cumulative_trapezoid(values, spacing: float) -> np.ndarray:
    """Running trapezoid sums; out[0] = 0, out[j] = integral up to node j."""
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise ValueError("cumulative_trapezoid needs at least 1 sample")
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    out = np.empty(values.size)
    out[0] = 0.0
    np.cumsum(spacing * 0.5 * (values[1:] + values[:-1]), out=out[1:])
    return out


def simpson3(h_a: float, h_mid: float, h_b: float, a: float, b: float) -> float:
    """Three-point Simpson rule ((b-a)/6) * (h(a) + 4*h((a+b)/2) + h(b)).

    Exact for cubic polynomials; intended for intervals where b - a is small.
    """
    if not b > a:
        raise ValueError("simpson3 requires b > a")
    return (b - a) / 6.0 * (h_a + 4.0 * h_mid + h_b)


def prefix_trapezoid_matrix(count: int, spacing: float) -> np.ndarray:
    """Lower-triangular weight matrix C with (C @ v)_j = cumulative_trapezoid(v)[j].

    Row j holds the composite trapezoid weights for the prefix grid
    {x_0, ..., x_j}; row 0 is zero (empty integration range).
    """
    if count < 1:
        raise ValueError("count must be positive")
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    C = np.tril(np.full((count, count), spacing), k=0)
    C[:, 0] = 0.5 * spacing
    idx = np.arange(count)
    C[idx, idx] = 0.5 * spacing
    C[0, :] = 0.0
    return C
