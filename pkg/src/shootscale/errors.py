"""Exception types shared across the package."""
from __future__ import annotations

__all__ = [
    "ShootScaleError",
    "InvalidOrderError",
    "NonFiniteError",
    "NotApplicableError",
    "StepSizeUnderflowError",
    "EmptyCurveError",
    "BracketLostError",
    "SameClassAtEndsError",
    "NotNearCriticalError",
    "PreconditionError",
    "LevelNotReachedError",
    "ConfigError",
]


class ShootScaleError(Exception):
    """Base class for all package errors."""


class InvalidOrderError(ShootScaleError, ValueError):
    """Derivative order outside {0, 1, 2}."""


class NonFiniteError(ShootScaleError, ArithmeticError):
    """An evaluation or integration state left the finite float64 range."""


class NotApplicableError(ShootScaleError):
    """Requested predicate is undefined for this model at this point."""


class StepSizeUnderflowError(ShootScaleError):
    """Adaptive step fell below the relative floor; integration cannot proceed."""


class EmptyCurveError(ShootScaleError):
    """No alpha in the requested range produced a boundary-value solution."""


class BracketLostError(ShootScaleError):
    """Extremum refinement left its bracket; the fold candidate is unreliable."""


class SameClassAtEndsError(ShootScaleError):
    """Bisection on the secondary parameter needs differing classes at the ends."""


class NotNearCriticalError(ShootScaleError):
    """Certificate requested away from a critical point (``|w(1)|`` too large)."""


class PreconditionError(ShootScaleError):
    """A mathematical hypothesis of the requested check does not hold."""


class LevelNotReachedError(ShootScaleError):
    """A profile never attains the requested level on its domain."""


class ConfigError(ShootScaleError, ValueError):
    """Malformed configuration text or invalid CLI parameter combination."""
