"""Interval bounds on positive quantities and the verdict decision.

Each side of an inequality is carried as an interval [lo, hi] plus a nominal
value. A FunctionalValue maps to its interval by kind:

- quadrature, closed-form: [v - err, v + err]
- optimizer-upper-bound:   (0, v + err]
- optimizer-lower-bound:   [v - err, inf)

Products, positive scalings and signed powers are monotone on positive
intervals, so composite sides stay sound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from geokit.models import FunctionalValue, Relation, Verdict, Verifiability

logger = logging.getLogger(__name__)

FLOOR_RTOL = 1e-9


def _pow(x: float, e: float) -> float:
    if e == 0:
        return 1.0
    if x == 0.0:
        return 0.0 if e > 0 else math.inf
    if math.isinf(x):
        return math.inf if e > 0 else 0.0
    return x**e


@dataclass(frozen=True)
class Bound:
    value: float
    lo: float
    hi: float

    @classmethod
    def exact(cls, value: float) -> Bound:
        return cls(value, value, value)

    @classmethod
    def of(cls, fv: FunctionalValue) -> Bound:
        v, e = fv.value, fv.err
        if fv.kind == "optimizer-upper-bound":
            return cls(v, 0.0, v + e)
        if fv.kind == "optimizer-lower-bound":
            return cls(v, max(v - e, 0.0), math.inf)
        return cls.measured(fv)

    @classmethod
    def measured(cls, fv: FunctionalValue) -> Bound:
        """v ± err regardless of kind; for values evaluated at a fixed competitor."""
        return cls(fv.value, max(fv.value - fv.err, 0.0), fv.value + fv.err)

    @classmethod
    def bracket(
        cls,
        lower: FunctionalValue | None,
        upper: FunctionalValue | None,
        nominal: FunctionalValue,
    ) -> Bound:
        lo = max(lower.value - lower.err, 0.0) if lower is not None else 0.0
        hi = upper.value + upper.err if upper is not None else math.inf
        return cls(nominal.value, lo, hi)

    def __mul__(self, other: Bound | float) -> Bound:
        if not isinstance(other, Bound):
            other = Bound.exact(float(other))
        return Bound(self.value * other.value, self.lo * other.lo, self.hi * other.hi)

    __rmul__ = __mul__

    def __pow__(self, e: float) -> Bound:
        a, b = _pow(self.lo, e), _pow(self.hi, e)
        return Bound(_pow(self.value, e), min(a, b), max(a, b))

    def __truediv__(self, other: Bound | float) -> Bound:
        if not isinstance(other, Bound):
            other = Bound.exact(float(other))
        return self * other**-1.0

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_value(self, functional: str) -> FunctionalValue:
        meta = {"functional": functional}
        if self.lo == self.hi:
            return FunctionalValue(value=self.value, kind="closed-form", meta=meta)
        if math.isinf(self.hi):
            return FunctionalValue(value=self.value, kind="optimizer-lower-bound",
                                   err=max(self.value - self.lo, 0.0), meta=meta)
        if self.lo == 0.0:
            return FunctionalValue(value=self.value, kind="optimizer-upper-bound",
                                   err=max(self.hi - self.value, 0.0), meta=meta)
        err = max(self.hi - self.value, self.value - self.lo, 0.0)
        return FunctionalValue(value=self.value, kind="quadrature", err=err, meta=meta)


def minimum(a: Bound, b: Bound) -> Bound:
    return Bound(min(a.value, b.value), min(a.lo, b.lo), min(a.hi, b.hi))


def product(bounds: list[Bound]) -> Bound:
    out = Bound.exact(1.0)
    for b in bounds:
        out = out * b
    return out


@dataclass(frozen=True)
class Decision:
    verdict: Verdict | None
    slack: float
    tolerance: float
    certified_failure: bool = False


def _half_width(b: Bound) -> float:
    return 0.5 * b.width if math.isfinite(b.width) else 0.0


def decide(
    lhs: Bound,
    rhs: Bound,
    relation: Relation,
    verifiability: Verifiability,
    rtol: float = 0.0,
) -> Decision:
    """Verdict for `lhs relation rhs`; slack is positive when the relation holds.

    rtol widens the relative floor for sides that agree only to a known accuracy.
    """
    floor = max(rtol, FLOOR_RTOL) * max(abs(lhs.value), abs(rhs.value))
    if relation == ">=":
        small, large = rhs, lhs
        slack = lhs.value - rhs.value
    else:
        small, large = lhs, rhs
        slack = rhs.value - lhs.value

    if verifiability == "report-only":
        return Decision(None, slack, floor)

    if verifiability == "two-sided":
        tolerance = _half_width(lhs) + _half_width(rhs) + floor
        holds = small.lo <= large.hi + floor
        if relation == "=":
            holds = holds and large.lo <= small.hi + floor
        return Decision("verified" if holds else "violated", slack, tolerance)

    if verifiability == "structural":
        holds = small.hi <= large.lo + floor
        return Decision("verified" if holds else "violated", slack, floor)

    proven = small.hi <= large.lo + floor
    failed = small.lo > large.hi + floor
    if relation == "=":
        proven = proven and large.hi <= small.lo + floor
        failed = failed or large.lo > small.hi + floor
    verdict: Verdict = "verified" if proven else "inconclusive"
    return Decision(verdict, slack, floor, certified_failure=failed)
