"""Change of variables between the exponential and mu-form problems, and the
rescaling map from limiting-problem solutions to mu-form solutions.

The pointwise identity exp(-1/(eps + eps^2 u)) = exp(-1/eps) exp(u/(1+eps u))
makes (lam, u) -> (mu, w) = (lam eps^2 e^{1/eps}, eps^2 u) an exact conjugacy
between the two boundary-value problems, fold for fold.

Separately, a limiting-problem solution (eta, v) with v(0) = alpha > eps can
be truncated at the level radius a where v(a) = eps and rescaled to the unit
interval: w(t) = v(a t) - eps solves the mu-form problem with mu = eta a^2 and
w(0) = alpha - eps.  Since a(alpha) grows with alpha, mu is increasing in
w(0), which is what confines folds of the mu-form curve to bounded heights.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

from .errors import LevelNotReachedError, NonFiniteError, PreconditionError
from .ivp import IntegratorSettings, RadialProfile
from .linearized import CertificateReport
from .models import Limiting, MuForm, NonlinearityModel
from .shoot import bvp_profile, lambda_of_alpha
from .curve import TraceOptions, trace

__all__ = [
    "MuPoint",
    "to_mu",
    "from_mu",
    "limiting_fold",
    "lemma42_map",
    "mu_monotonicity_check",
    "cross_validate_map",
]

# exp(1/eps) must stay inside float64
MIN_EPS = 1.0 / 700.0


@dataclass(frozen=True)
class MuPoint:
    mu: float
    w0: float
    source: str                 # "direct_shot" | "level_map"
    alpha: float | None = None  # originating limiting height, for the map
    level_radius: float | None = None


def _mu_factor(eps: float) -> float:
    if eps < MIN_EPS:
        raise NonFiniteError(
            f"eps = {eps!r} below {MIN_EPS:.6g}: exp(1/eps) overflows float64")
    return eps * eps * math.exp(1.0 / eps)


def to_mu(lam: float, u_profile: RadialProfile, eps: float) -> tuple[float, RadialProfile]:
    """(mu, w) = (lam eps^2 e^{1/eps}, eps^2 u); exact, pointwise."""
    mu = lam * _mu_factor(eps)
    return mu, u_profile.value_scaled(eps * eps, mu)


def from_mu(mu: float, w_profile: RadialProfile, eps: float) -> tuple[float, RadialProfile]:
    """Exact inverse of :func:`to_mu`."""
    lam = mu / _mu_factor(eps)
    return lam, w_profile.value_scaled(1.0 / (eps * eps), lam)


@functools.lru_cache(maxsize=8)
def _limiting_fold_cached(abs_tol: float, rel_tol: float) -> tuple[float, float]:
    settings = IntegratorSettings(abs_tol=abs_tol, rel_tol=rel_tol)
    curve = trace(Limiting(), 2, 0.3, 6.0,
                  TraceOptions(initial_points=60, validate_folds=False), settings)
    mins = [t for t in curve.turning_points if t.kind == "min"]
    if len(mins) != 1:
        raise PreconditionError(
            f"expected exactly one fold on the limiting curve, found {len(mins)}")
    return mins[0].lam, mins[0].alpha


def limiting_fold(settings: IntegratorSettings | None = None) -> tuple[float, float]:
    """(eta0, v0_height): the unique fold of the limiting curve, cached per
    tolerance pair.  The curve turns right there: no solutions below eta0,
    two above."""
    settings = settings or IntegratorSettings()
    return _limiting_fold_cached(settings.abs_tol, settings.rel_tol)


def lemma42_map(eta: float, v_profile: RadialProfile, eps: float,
                settings: IntegratorSettings | None = None,
                v0_height: float | None = None) -> MuPoint:
    """Map a limiting-problem solution (eta, v) to a mu-form point.

    Locates the first radius a with v(a) = eps on the stored profile (a pure
    interpolation root solve; no re-shooting), and returns
    mu = eta a^2, w0 = v(0) - eps.
    """
    settings = settings or IntegratorSettings()
    alpha = v_profile.alpha
    if eps <= 0.0:
        raise PreconditionError(f"eps must be positive, got {eps!r}")
    if v0_height is None:
        v0_height = limiting_fold(settings)[1]
    if not eps < v0_height:
        raise PreconditionError(
            f"eps = {eps!r} must lie below the limiting fold height {v0_height:.6f}")
    if not eps < alpha:
        raise PreconditionError(f"eps = {eps!r} must lie below v(0) = {alpha!r}")

    lo, hi = 0.0, v_profile.r_end
    g_lo = alpha - eps
    g_hi = v_profile.interpolate(hi)[0] - eps
    if g_hi >= 0.0:
        raise LevelNotReachedError(
            f"profile never descends to the level {eps!r} on [0, {hi!r}]")
    for _ in range(200):
        if hi - lo <= 1e-14:
            break
        mid = 0.5 * (lo + hi)
        gm = v_profile.interpolate(mid)[0] - eps
        if gm == 0.0:
            lo = hi = mid
            break
        if g_lo * gm < 0.0:
            hi, g_hi = mid, gm
        else:
            lo, g_lo = mid, gm
    a = 0.5 * (lo + hi)
    return MuPoint(mu=eta * a * a, w0=alpha - eps, source="level_map",
                   alpha=alpha, level_radius=a)


def mu_monotonicity_check(eps: float, alphas, n: int = 2,
                          settings: IntegratorSettings | None = None) -> CertificateReport:
    """Map a grid of limiting heights above the fold through
    :func:`lemma42_map`; pass iff mu is strictly increasing along the grid."""
    settings = settings or IntegratorSettings()
    _, v0_height = limiting_fold(settings)
    mus = []
    for alpha in alphas:
        pair = bvp_profile(Limiting(), float(alpha), n, settings, self_check=False)
        if pair is None:
            raise LevelNotReachedError(f"no limiting solution at alpha = {alpha!r}")
        eta, profile = pair
        mus.append(lemma42_map(eta, profile, eps, settings, v0_height).mu)
    increments = [b - a for a, b in zip(mus, mus[1:])]
    margin = min(increments) if increments else math.inf
    return CertificateReport(
        kind="mu_monotonicity",
        passed=margin > 0.0,
        margins={"min_increment": margin, "n_points": float(len(mus))},
        details=f"eps={eps!r}, grid of {len(mus)} heights",
    )


def cross_validate_map(eps: float, alphas, n: int = 2,
                       settings: IntegratorSettings | None = None) -> float:
    """Largest relative discrepancy between mapped mu values and direct
    mu-form shots at the same heights; the map is exact mathematics, so this
    measures pure integration error."""
    settings = settings or IntegratorSettings()
    _, v0_height = limiting_fold(settings)
    model = MuForm(eps)
    worst = 0.0
    for alpha in alphas:
        pair = bvp_profile(Limiting(), float(alpha), n, settings, self_check=False)
        if pair is None:
            raise LevelNotReachedError(f"no limiting solution at alpha = {alpha!r}")
        eta, profile = pair
        point = lemma42_map(eta, profile, eps, settings, v0_height)
        direct = lambda_of_alpha(model, point.w0, n, settings)
        if direct is None:
            raise LevelNotReachedError(f"no direct mu-form solution at w0 = {point.w0!r}")
        worst = max(worst, abs(point.mu / direct[0] - 1.0))
    return worst
