"""Exception types shared across the package."""

from __future__ import annotations


class IvdrError(Exception):
    """Base class for all package-specific errors."""


class RankDeficient(IvdrError):
    """A design matrix is singular within tolerance."""


class DegenerateOutcome(IvdrError):
    """A binary outcome is constant, so no binary-response model is identified."""


class SeparationSuspected(IvdrError):
    """Coefficients diverged during a binary-response fit (perfect separation)."""


class NonFinite(IvdrError):
    """A likelihood evaluation produced a non-finite value at admissible parameters."""


class NonFiniteObjective(IvdrError):
    """The objective could not be evaluated finitely along the search path.

    Carries ``last_iterate``, the most recent point (in original coordinates)
    where the objective was finite, or None if even the start failed.
    """

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class BoundarySolution(IvdrError):
    """The error correlation was driven to the edge of its domain (|rho| -> 1)."""


class AllPointsFailed(IvdrError):
    """Every grid point of a curve fit failed; no curve can be returned."""


class ReplicateFailure(IvdrError):
    """Too many bootstrap replicates failed to produce a usable band."""


class LevelOutOfRange(IvdrError):
    """A probability level lies outside the open unit interval."""


class MissingColumn(IvdrError):
    """A column named in the column specification is absent from the file."""


class NonNumericColumn(IvdrError):
    """A referenced column contains a value that cannot be used numerically."""
