"""
Exact affine envelopes of finite modulus tables.

Tables map a realized distance to an observed value. Fits are computed with
rational arithmetic: an upper envelope ``y <= c*x + b`` for displacement-type
tables and a lower envelope ``y >= a*x - b`` for separation-type tables. The
chosen line is the one touching the hull at the middle of the scale range,
with ties going to the smaller slope.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from coarsetk.metric_core import Number, as_number, exact

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AffineFit:
    """``c*x + b`` (upper) or ``c*x - b`` (lower) with exact coefficients."""

    c: Fraction
    b: Fraction

    def upper(self, x: Number) -> Fraction:
        return self.c * exact(x) + self.b

    def lower(self, x: Number) -> Fraction:
        return self.c * exact(x) - self.b

    def to_dict(self) -> Dict[str, Number]:
        return {"c": as_number(self.c), "b": as_number(self.b)}


def _points(table: Mapping[Number, Number]) -> List[Tuple[Fraction, Fraction]]:
    return sorted((exact(x), exact(y)) for x, y in table.items())


def _cross(o, a, b) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull(points: Sequence[Tuple[Fraction, Fraction]], upper: bool) -> List[Tuple[Fraction, Fraction]]:
    """Monotone-chain half hull, left to right."""
    hull: List[Tuple[Fraction, Fraction]] = []
    for p in points:
        while len(hull) >= 2:
            turn = _cross(hull[-2], hull[-1], p)
            if (upper and turn >= 0) or (not upper and turn <= 0):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _edge_slopes(hull: Sequence[Tuple[Fraction, Fraction]]) -> List[Fraction]:
    return [(q[1] - p[1]) / (q[0] - p[0]) for p, q in zip(hull, hull[1:]) if q[0] != p[0]]


def upper_affine_fit(table: Mapping[Number, Number], x_max: Optional[Number] = None) -> AffineFit:
    """
    Least dominating line ``c*x + b`` with ``c, b >= 0``.

    Args:
        table: observed values keyed by scale
        x_max: right end of the scale range (defaults to the largest key)

    Returns:
        The dominating line with the smallest value at ``x_max / 2``
    """
    points = _points(table)
    if not points:
        return AffineFit(Fraction(0), Fraction(0))
    middle = (exact(x_max) if x_max is not None else points[-1][0]) / 2
    slopes = {Fraction(0)} | {s for s in _edge_slopes(_hull(points, upper=True)) if s > 0}
    slopes.add(lipschitz_constant(table))
    best = None
    for c in sorted(slopes):
        b = max(Fraction(0), max(y - c * x for x, y in points))
        score = c * middle + b
        if best is None or score < best[0]:
            best = (score, AffineFit(c, b))
    return best[1]


def lower_affine_fit(table: Mapping[Number, Number], x_max: Optional[Number] = None) -> Optional[AffineFit]:
    """
    Greatest dominated line ``a*x - b`` with ``a > 0`` and ``b >= 0``.

    Returns:
        None when no positive slope stays below the table (the values do not grow)
    """
    points = _points(table)
    if not points:
        return None
    middle = (exact(x_max) if x_max is not None else points[-1][0]) / 2
    slopes = {s for s in _edge_slopes(_hull(points, upper=False)) if s > 0}
    if points[-1][0] > 0 and points[-1][1] > 0:
        slopes.add(points[-1][1] / points[-1][0])
    best = None
    for a in sorted(slopes, reverse=True):
        b = max(Fraction(0), max(a * x - y for x, y in points))
        score = a * middle - b
        if best is None or score > best[0]:
            best = (score, AffineFit(a, b))
    return best[1] if best is not None else None


def lipschitz_constant(table: Mapping[Number, Number]) -> Fraction:
    """Largest ratio ``y / x`` over positive scales."""
    ratios = [exact(y) / exact(x) for x, y in table.items() if exact(x) > 0]
    return max(ratios) if ratios else Fraction(0)


def linear_constant(table: Mapping[Number, Number], r0: Number) -> Fraction:
    """Smallest c with ``y <= c*x`` for every scale ``x >= r0``."""
    ratios = [exact(y) / exact(x) for x, y in table.items() if exact(x) >= exact(r0) and exact(x) > 0]
    return max(ratios) if ratios else Fraction(0)


def least_start(table: Mapping[Number, Number], c_max: Number) -> Optional[Fraction]:
    """Smallest scale r0 in the table with ``y <= c_max*x`` for every ``x >= r0``."""
    c_max = exact(c_max)
    start = None
    for x, y in sorted(_points(table), reverse=True):
        if x <= 0 or y > c_max * x:
            break
        start = x
    return start


def quasi_isometry_constants(upper: AffineFit, lower: Optional[AffineFit]) -> Optional[Tuple[Fraction, Fraction]]:
    """
    Combine the two envelopes into one ``(c, b)``.

    ``y <= c1*x + b1`` and ``y >= a*x - b2`` give ``x/c - b <= y <= c*x + b``
    with ``c = max(c1, 1/a)`` and ``b = max(b1, b2)``.
    """
    if lower is None or lower.c <= 0:
        return None
    c = max(upper.c, 1 / lower.c, Fraction(1))
    return c, max(upper.b, lower.b)
