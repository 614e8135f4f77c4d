"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class GeokitError(Exception):
    """Base class for every error raised by geokit."""


class InvalidBodyError(GeokitError, ValueError):
    """Body samples or parameters violate the representation invariants."""


class ConvexityError(InvalidBodyError):
    """Planar support samples fail the h'' + h convexity margin."""


class DegenerateBodyError(GeokitError):
    """A computation left the admissible class (origin outside, zero samples)."""


class GridMismatchError(GeokitError, ValueError):
    """Operands live on different grids or have the wrong sample count."""


class ArityError(GeokitError, ValueError):
    """Wrong number of bodies or wrong dimension for an operation."""


class UnsupportedError(GeokitError):
    """Requested combination lies outside the dimension policy."""


class UnknownRuleError(GeokitError, KeyError):
    """Rule id not present in the catalogue."""


class SkippedCaseError(GeokitError):
    """Generated inputs fall outside the class a rule is stated for."""
