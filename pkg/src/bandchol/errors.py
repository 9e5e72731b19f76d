"""Exception types shared across the package.

Everything derives from BandCholError so callers can catch the package's
failures with one clause while still distinguishing storage misuse from
numerical breakdown.
"""

from __future__ import annotations


class BandCholError(Exception):
    """Base class for all errors raised by this package."""


class OutOfBand(BandCholError):
    """An (i, j) index has no slot in the packed band storage."""


class InvalidBandwidth(BandCholError):
    """Bandwidth incompatible with the matrix dimension or the operation."""


class ShapeMismatch(BandCholError):
    """Operands disagree on dimension, bandwidth, or vector length."""


class SingularFactor(BandCholError):
    """A triangular factor has a zero (or negative) diagonal entry."""


class NotPositiveDefinite(BandCholError):
    """Factorization hit a non-positive pivot.

    `column` is the global column index of the offending pivot.
    """

    def __init__(self, column: int, message: str | None = None):
        self.column = int(column)
        super().__init__(message or f"matrix is not positive definite at column {column}")


class BandwidthNotDivisible(BandCholError):
    """Bandwidth cannot be split into the requested block grid."""


class GridTooSmall(BandCholError):
    """Block grid dimension below the minimum of 3."""


class CountOverflow(BandCholError):
    """An operation count does not fit in an unsigned 64-bit integer."""
