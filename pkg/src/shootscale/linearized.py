"""Linearized (variational) equation along a solution, and fold certificates.

Along a boundary-value solution u with parameter lam, the linearized problem

    w'' + (n-1)/r w' + lam f'(u(r)) w = 0,   w'(0) = 0, w(1) = 0

characterizes critical points: shooting with w(0) = 1 gives a boundary value
w(1) that vanishes exactly when the problem has a nontrivial kernel.  The
w(0) = 1 normalization is used throughout; every certificate below is
invariant under rescaling w, so nothing depends on it.

Certificates:

* positivity       -- w > 0 on [0, 1) at a fold,
* nondegeneracy    -- the radial integrals I1 = int f(u) w r^{n-1} dr and
                      I2 = int f''(u) w^3 r^{n-1} dr are both nonzero,
* test function    -- a function z = r u' + abar with one sign change at
                      xi whose residual L[z] has the opposite sign pattern,
                      which forbids interior zeros of w (n = 2 only),
* Sturm guard      -- u f' - f single-signed on the solution range implies
                      no kernel, so |w(1)| must stay away from zero.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import (
    NotApplicableError,
    NotNearCriticalError,
    PreconditionError,
)
from .ivp import IntegratorSettings, RadialProfile, _integrate_second_order, _Segment
from .models import NonlinearityModel, is_log_concave, sturm_roots

__all__ = [
    "LinearizedProfile",
    "CertificateReport",
    "solve_linearized",
    "variational_profile",
    "positivity_certificate",
    "nondegeneracy_integrals",
    "nondegeneracy",
    "test_function_search",
    "sturm_nonsingularity_check",
]

KERNEL_GATE = 1e-3      # |w(1)| below this counts as "at a critical point"
NONDEG_TAU_REL = 1e-8   # integral must exceed this fraction of its L1 scale
EDGE_EXCLUSION = 1e-3   # open-interval sign conditions are tested inside this margin
STURM_GATE = 1e-4       # |w(1)| above this certifies "no kernel" under the Sturm guard


@dataclass
class LinearizedProfile:
    """Shooting solution of the variational equation with w(0)=1, w'(0)=0."""

    base: RadialProfile
    r: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    w_at_1: float
    segments: list[_Segment] = field(default_factory=list)
    _seg_starts: list[float] = field(default_factory=list)

    def interpolate(self, r: float) -> tuple[float, float]:
        r = min(max(r, 0.0), float(self.r[-1]))
        i = bisect_right(self._seg_starts, r) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        return self.segments[i].eval(r)

    def value(self, r: float) -> float:
        return self.interpolate(r)[0]

    def sample(self, rs: np.ndarray) -> np.ndarray:
        return np.array([self.interpolate(float(r))[0] for r in rs])


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of a structural check; ``passed`` is a pure function of the
    margins and the fixed thresholds above."""

    kind: str
    passed: bool
    margins: dict[str, float]
    details: str = ""

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "margins": {k: self.margins[k] for k in sorted(self.margins)},
            "details": self.details,
        }


def variational_profile(model: NonlinearityModel, base: RadialProfile,
                        r_stop: float | None = None,
                        settings: IntegratorSettings | None = None) -> LinearizedProfile:
    """Integrate the variational equation along ``base`` (any frame).

    Uses the base profile's dense output for u(r) and the base ``lam``;
    starts from the Taylor state w(h) = 1 - lam f'(alpha) h^2 / (2n).
    """
    if settings is None:
        settings = IntegratorSettings()
    lam = base.lam
    n = base.n
    alpha = base.alpha
    if r_stop is None:
        r_stop = base.r_end

    fp0 = model.df(alpha)
    h0 = settings.h_init
    curv = abs(lam) * abs(fp0)
    if curv > 0.0:
        h0 = min(h0, 1e-2 * math.sqrt(2.0 * n / curv))
    a2 = -lam * fp0 / (2.0 * n)
    w_h = 1.0 + a2 * h0 * h0
    dw_h = 2.0 * a2 * h0

    def accel(r: float, w: float, pw: float) -> float:
        u = base.interpolate(r)[0]
        return -(n - 1) / r * pw - lam * model.df(u) * w

    nodes, segments, _, _ = _integrate_second_order(
        accel, h0, w_h, dw_h, r_stop, settings)

    series_seg = _Segment(
        r0=0.0, h=h0,
        cu=(1.0, 0.0, a2 * h0 * h0, 0.0, 0.0),
        cp=(0.0, 2.0 * a2 * h0, 0.0, 0.0, 0.0),
    )
    segments = [series_seg] + segments
    nodes = [(0.0, 1.0, 0.0)] + nodes
    arr = np.asarray(nodes, dtype=float)
    return LinearizedProfile(
        base=base,
        r=arr[:, 0],
        w=arr[:, 1],
        dw=arr[:, 2],
        w_at_1=float(arr[-1, 1]),
        segments=segments,
        _seg_starts=[s.r0 for s in segments],
    )


def solve_linearized(model: NonlinearityModel, bvp: RadialProfile,
                     settings: IntegratorSettings | None = None) -> LinearizedProfile:
    """Variational solve along a rescaled boundary-value profile on [0, 1].

    ``bvp.lam`` must be the boundary-value parameter (as produced by
    :func:`shootscale.shoot.bvp_profile`).  A nontrivial kernel exists exactly
    when the reported ``w_at_1`` vanishes.
    """
    return variational_profile(model, bvp, r_stop=1.0, settings=settings)


def _require_near_critical(lin: LinearizedProfile) -> None:
    if abs(lin.w_at_1) > KERNEL_GATE:
        raise NotNearCriticalError(
            f"|w(1)| = {abs(lin.w_at_1):.3e} exceeds {KERNEL_GATE:.0e}; "
            "certificate is only meaningful at a critical point")


def positivity_certificate(lin: LinearizedProfile,
                           grid_points: int = 2000) -> CertificateReport:
    """Pass iff min w > 0 on [0, 1 - EDGE_EXCLUSION] (w vanishes at r = 1)."""
    _require_near_critical(lin)
    rs = np.linspace(0.0, 1.0 - EDGE_EXCLUSION, grid_points)
    values = lin.sample(rs)
    margin = float(values.min())
    return CertificateReport(
        kind="positivity",
        passed=margin > 0.0,
        margins={"min_w": margin, "w_at_1": lin.w_at_1},
        details=f"min over {grid_points} nodes on [0, {1.0 - EDGE_EXCLUSION}]",
    )


def nondegeneracy_integrals(model: NonlinearityModel, bvp: RadialProfile,
                            lin: LinearizedProfile) -> dict[str, float]:
    """I1, I2 and their L1 scales by adaptive quadrature on the dense outputs."""
    n = bvp.n

    def g1(r: float) -> float:
        return model.f(bvp.interpolate(r)[0]) * lin.value(r) * r ** (n - 1)

    def g2(r: float) -> float:
        return model.d2f(bvp.interpolate(r)[0]) * lin.value(r) ** 3 * r ** (n - 1)

    opts = dict(limit=200, epsabs=1e-13, epsrel=1e-11)
    i1 = quad(g1, 0.0, 1.0, **opts)[0]
    i2 = quad(g2, 0.0, 1.0, **opts)[0]
    s1 = quad(lambda r: abs(g1(r)), 0.0, 1.0, **opts)[0]
    s2 = quad(lambda r: abs(g2(r)), 0.0, 1.0, **opts)[0]
    return {"I1": i1, "I2": i2, "scale1": s1, "scale2": s2}


def nondegeneracy(model: NonlinearityModel, bvp: RadialProfile,
                  lin: LinearizedProfile) -> CertificateReport:
    """Pass iff |I1| and |I2| both exceed NONDEG_TAU_REL times their scales."""
    _require_near_critical(lin)
    vals = nondegeneracy_integrals(model, bvp, lin)
    tau1 = NONDEG_TAU_REL * vals["scale1"]
    tau2 = NONDEG_TAU_REL * vals["scale2"]
    ok = abs(vals["I1"]) > tau1 and abs(vals["I2"]) > tau2
    return CertificateReport(
        kind="nondegeneracy",
        passed=ok,
        margins={**vals, "tau1": tau1, "tau2": tau2, "w_at_1": lin.w_at_1},
        details="radial weight r^(n-1); surface-measure constant dropped",
    )


def _bisect_root(fn, lo: float, hi: float, f_lo: float, f_hi: float,
                 tol: float = 1e-12) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if f_lo * fm < 0.0:
            hi, f_hi = mid, fm
        else:
            lo, f_lo = mid, fm
    return 0.5 * (lo + hi)


def test_function_search(model: NonlinearityModel, bvp: RadialProfile,
                         grid_points: int = 400) -> CertificateReport:
    """Search for the test function z(r) = r u'(r) + abar (n = 2 only).

    Since z' = -lam r f(u) < 0, z has at most one root; since the log-slope
    h' = f'/f is increasing along r for a log-concave f, the residual
    L[z] = lam f (abar h'(u) - 2) changes sign at most once, from - to +.
    The search moves abar until both roots coincide at xi; the certificate
    then checks z > 0, L[z] < 0 on (0, xi) and z < 0, L[z] > 0 on (xi, 1)
    on node grids that stay EDGE_EXCLUSION away from {0, xi, 1}.

    When even the largest admissible abar keeps L[z] negative throughout,
    the sign change never happens and the certificate degenerates to the
    single-interval case xi = 1.
    """
    if bvp.n != 2:
        raise PreconditionError(f"test-function construction requires n = 2, got n = {bvp.n}")
    if not is_log_concave(model):
        raise NotApplicableError(f"model {model.describe()!r} is not strictly log-concave")

    lam = bvp.lam
    boundary_slope = abs(float(bvp.du[-1]))   # |u'(1)| > 0
    u_boundary = max(float(bvp.u[-1]), 0.0)
    slope_at_zero = model.log_slope(u_boundary)
    abar_lo = 0.0 if math.isinf(slope_at_zero) else 2.0 / slope_at_zero

    def z_at(r: float, abar: float) -> float:
        u, du = bvp.interpolate(r)
        return r * du + abar

    def g_at(r: float, abar: float) -> float:
        u = bvp.interpolate(r)[0]
        hp = model.log_slope(u)
        if math.isinf(hp):
            return math.inf
        return abar * hp - 2.0

    def lz_at(r: float, abar: float) -> float:
        u = bvp.interpolate(r)[0]
        return lam * (abar * model.df(u) - 2.0 * model.f(u))

    if boundary_slope <= abar_lo:
        # single-interval case: pick abar with z > 0 and L[z] < 0 on all of (0, 1)
        abar = 0.5 * (boundary_slope + abar_lo)
        xi = 1.0
        rs = np.linspace(EDGE_EXCLUSION, 1.0 - EDGE_EXCLUSION, grid_points)
        z_vals = np.array([z_at(r, abar) for r in rs])
        lz_vals = np.array([lz_at(r, abar) for r in rs])
        margins = {
            "alpha_bar": abar,
            "xi": xi,
            "min_z_left": float(z_vals.min()),
            "max_Lz_left": float(lz_vals.max()),
        }
        passed = margins["min_z_left"] > 0.0 and margins["max_Lz_left"] < 0.0
        return CertificateReport(
            kind="test_function",
            passed=passed,
            margins=margins,
            details="no admissible sign change of L[z]; single-interval certificate (xi = 1)",
        )

    def roots(abar: float) -> tuple[float, float]:
        # root of the decreasing z: z(0) = abar > 0, z(1) = abar - |u'(1)| < 0
        z1 = z_at(1.0, abar)
        if z1 >= 0.0:
            rho_z = 1.0
        else:
            rho_z = _bisect_root(lambda r: z_at(r, abar), 0.0, 1.0, abar, z1)
        # root of the increasing g = abar h'(u) - 2
        g0 = g_at(0.0, abar)
        g1 = g_at(1.0 - 1e-13, abar)
        if g0 >= 0.0:
            rho_g = 0.0
        elif g1 <= 0.0:
            rho_g = 1.0
        else:
            rho_g = _bisect_root(lambda r: g_at(r, abar), 0.0, 1.0 - 1e-13, g0, g1)
        return rho_z, rho_g

    lo, hi = abar_lo, boundary_slope
    # phi(abar) = rho_z - rho_g is negative near abar_lo and positive near
    # the upper end; bisect on the sign
    for _ in range(80):
        abar = 0.5 * (lo + hi)
        rho_z, rho_g = roots(abar)
        if abs(rho_z - rho_g) < 1e-11:
            break
        if rho_z < rho_g:
            lo = abar
        else:
            hi = abar
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    abar = 0.5 * (lo + hi)
    rho_z, rho_g = roots(abar)
    xi = 0.5 * (rho_z + rho_g)

    margins: dict[str, float] = {"alpha_bar": abar, "xi": xi}
    left_hi = xi - EDGE_EXCLUSION
    right_lo = xi + EDGE_EXCLUSION
    conditions = []
    if left_hi > EDGE_EXCLUSION:
        rs = np.linspace(EDGE_EXCLUSION, left_hi, grid_points)
        margins["min_z_left"] = float(min(z_at(r, abar) for r in rs))
        margins["max_Lz_left"] = float(max(lz_at(r, abar) for r in rs))
        conditions += [margins["min_z_left"] > 0.0, margins["max_Lz_left"] < 0.0]
    if right_lo < 1.0 - EDGE_EXCLUSION:
        rs = np.linspace(right_lo, 1.0 - EDGE_EXCLUSION, grid_points)
        margins["max_z_right"] = float(max(z_at(r, abar) for r in rs))
        margins["min_Lz_right"] = float(min(lz_at(r, abar) for r in rs))
        conditions += [margins["max_z_right"] < 0.0, margins["min_Lz_right"] > 0.0]
    return CertificateReport(
        kind="test_function",
        passed=bool(conditions) and all(conditions),
        margins=margins,
        details=f"crossing search converged with xi = {xi:.6f}",
    )


def sturm_nonsingularity_check(model: NonlinearityModel, bvp: RadialProfile,
                               lin: LinearizedProfile) -> CertificateReport:
    """Non-singularity guard: with u f'(u) - f(u) single-signed on the range
    of u, the linearized problem has only the trivial solution, so the check
    passes iff |w(1)| > STURM_GATE.

    Raises :class:`PreconditionError` when the Sturm margin changes sign on
    (0, alpha], i.e. neither comparison direction applies.
    """
    alpha = bvp.alpha
    roots = [r for r in sturm_roots(model) if r < alpha * (1.0 + 1e-12)]
    if roots:
        raise PreconditionError(
            f"u f'(u) - f(u) changes sign inside (0, {alpha:.6g}] at {roots}; "
            "the Sturm comparison does not apply")
    us = np.linspace(alpha * 1e-4, alpha, 64)
    margin_vals = [u * model.df(u) - model.f(u) for u in us]
    m_lo, m_hi = float(min(margin_vals)), float(max(margin_vals))
    passed = abs(lin.w_at_1) > STURM_GATE
    return CertificateReport(
        kind="sturm_nonsingularity",
        passed=passed,
        margins={"w_at_1": lin.w_at_1, "sturm_margin_min": m_lo, "sturm_margin_max": m_hi},
        details="margin sign is "
                + ("positive" if m_lo > 0.0 else "negative" if m_hi < 0.0 else "mixed near 0"),
    )
