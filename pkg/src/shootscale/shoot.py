"""Shoot-and-scale: one lam = 1 solve per alpha plus an exact rescaling.

For an autonomous nonlinearity, if v solves the radial problem with lam = 1,
v(0) = alpha and v(R) = 0, then u(r) = v(R r) solves the same problem on the
unit ball with lam = R^2 and u(1) = 0.  The boundary-value pair (lam, u) is
therefore obtained from a single initial value solve; alpha = u(0) is the
global curve parameter and lam is never shot on directly.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .ivp import EventKind, IntegratorSettings, RadialProfile, integrate
from .models import NonlinearityModel

__all__ = ["Outcome", "ShotResult", "first_zero", "lambda_of_alpha", "bvp_profile"]


class Outcome(Enum):
    ZERO = "zero"
    NO_DESCENT = "no_descent"


# NoDescent reasons: a stall (derivative zero with u > 0, only possible when
# f < 0 somewhere), a blowup or range excursion, or plain r_max exhaustion.
R_MAX_REASON = "r_max"


@dataclass(frozen=True)
class ShotResult:
    alpha: float
    outcome: Outcome
    profile: RadialProfile
    zero_radius: float | None = None
    reason: str | None = None

    @property
    def lam(self) -> float | None:
        if self.zero_radius is None:
            return None
        return self.zero_radius * self.zero_radius


def first_zero(model: NonlinearityModel, alpha: float, n: int,
               settings: IntegratorSettings | None = None) -> ShotResult:
    """Integrate with lam = 1 from u(0) = alpha until u = 0 or no descent.

    Descent can fail three ways: the solution stalls (u' = 0 at u > 0),
    leaves the admissible range, or never reaches zero before r_max.
    """
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha!r}")
    if settings is None:
        settings = IntegratorSettings()
    profile = integrate(model, alpha, 1.0, n, settings,
                        stop_events={EventKind.ZERO_CROSSING, EventKind.DERIVATIVE_ZERO})
    stop = profile.stopped_by
    if stop is not None and stop.kind is EventKind.ZERO_CROSSING:
        return ShotResult(alpha, Outcome.ZERO, profile, zero_radius=stop.r)
    reason = R_MAX_REASON if stop is None else stop.kind.value
    return ShotResult(alpha, Outcome.NO_DESCENT, profile, reason=reason)


def lambda_of_alpha(model: NonlinearityModel, alpha: float, n: int,
                    settings: IntegratorSettings | None = None
                    ) -> tuple[float, float] | None:
    """(lam, R) with lam = R^2, or None when the shot never descends to zero."""
    shot = first_zero(model, alpha, n, settings)
    if shot.outcome is not Outcome.ZERO:
        return None
    return shot.zero_radius ** 2, shot.zero_radius


def bvp_profile(model: NonlinearityModel, alpha: float, n: int,
                settings: IntegratorSettings | None = None,
                self_check: bool = True) -> tuple[float, RadialProfile] | None:
    """Boundary-value pair (lam, u on [0, 1]), or None on no descent.

    With ``self_check`` the returned lam is re-integrated on [0, 1] and the
    boundary residual |u(1)| is required to stay within 10x the event
    tolerance in u units.
    """
    if settings is None:
        settings = IntegratorSettings()
    shot = first_zero(model, alpha, n, settings)
    if shot.outcome is not Outcome.ZERO:
        return None
    radius = shot.zero_radius
    lam = radius * radius
    scaled = shot.profile.scaled(radius, lam)
    if self_check:
        redo = integrate(model, alpha, lam, n, settings, r_end=1.0)
        residual = abs(redo.u[-1])
        # event tolerance in u units: slope at the boundary times the radial
        # refinement tolerance, plus the absolute floor
        slope = abs(scaled.du[-1])
        tol = 10.0 * (settings.abs_tol * (1.0 + slope)
                      + settings.rel_tol * abs(alpha))
        if residual > tol:
            raise AssertionError(
                f"re-shot boundary residual {residual:.3e} exceeds {tol:.3e} "
                f"at alpha = {alpha!r}")
    return lam, scaled
