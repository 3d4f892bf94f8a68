"""Radial initial value problem  u'' + (n-1)/r u' + lam f(u) = 0.

The engine is an embedded Dormand-Prince 5(4) pair with PI step-size control
and a quartic dense-output interpolant per accepted step.  The coordinate
singularity at r = 0 is removed by starting from a two-term Taylor expansion
at a small offset (:func:`series_start`) instead of patching the 0/0 limit in
the right-hand side.

Events are affine functions of the state (u, u'); each accepted step is
scanned for sign changes and crossings are polished on the dense output with
a bisection-safeguarded secant.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NonFiniteError, ShootScaleError, StepSizeUnderflowError
from .models import NonlinearityModel

__all__ = [
    "IntegratorSettings",
    "EventKind",
    "EventRecord",
    "RadialProfile",
    "series_start",
    "integrate",
]


@dataclass(frozen=True)
class IntegratorSettings:
    """Tolerances and guards for the adaptive integrator.

    ``h_min`` is a relative floor: a step of size h at position r fails when
    h < h_min * r, so integrations that legitimately begin at r ~ 1e-150
    (very steep initial layers) are not cut off by an absolute floor.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    h_init: float = 1e-4
    h_min: float = 1e-14
    r_max: float = 50.0
    u_max: float = 1e6
    u_margin: float = 1e-3

    def __post_init__(self) -> None:
        for name in ("abs_tol", "rel_tol", "h_init", "h_min", "r_max", "u_max", "u_margin"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.h_min < self.h_init < self.r_max:
            raise ValueError("need h_min < h_init < r_max")

    def with_tolerance_factor(self, factor: float) -> "IntegratorSettings":
        return IntegratorSettings(
            abs_tol=max(self.abs_tol * factor, 1e-13),
            rel_tol=max(self.rel_tol * factor, 1e-13),
            h_init=self.h_init,
            h_min=self.h_min,
            r_max=self.r_max,
            u_max=self.u_max,
            u_margin=self.u_margin,
        )


class EventKind(Enum):
    ZERO_CROSSING = "zero_crossing"
    DERIVATIVE_ZERO = "derivative_zero"
    BLOWUP = "blowup"
    RANGE_EXCEEDED = "range_exceeded"


@dataclass(frozen=True)
class EventRecord:
    kind: EventKind
    r: float
    u: float
    du: float


# --- Dormand-Prince 5(4) tableau ---------------------------------------------

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

# Quartic dense-output weights: y(r0 + th) = y0 + h * sum_i k_i * P_i(t),
# P_i(t) = p1 t + p2 t^2 + p3 t^3 + p4 t^4.
_P = (
    (1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432),
    (0.0, 0.0, 0.0, 0.0),
    (0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799),
    (0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072),
    (0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632),
    (0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844),
    (0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423),
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_MAX_STEPS = 2_000_000


@dataclass(frozen=True)
class _EventSpec:
    """Affine event g = y[comp] + offset with a crossing direction filter."""

    kind: EventKind
    comp: int            # 0 -> u, 1 -> u'
    offset: float
    direction: int       # -1 down, +1 up, 0 both
    terminal: bool
    min_r: float = 0.0


@dataclass
class _Segment:
    """One dense-output piece: y(r0 + t*h) = c0 + c1 t + c2 t^2 + c3 t^3 + c4 t^4."""

    r0: float
    h: float
    cu: tuple[float, float, float, float, float]
    cp: tuple[float, float, float, float, float]

    def eval(self, r: float) -> tuple[float, float]:
        t = (r - self.r0) / self.h
        cu, cp = self.cu, self.cp
        u = cu[0] + t * (cu[1] + t * (cu[2] + t * (cu[3] + t * cu[4])))
        p = cp[0] + t * (cp[1] + t * (cp[2] + t * (cp[3] + t * cp[4])))
        return u, p

    def eval_derivatives(self, r: float) -> tuple[float, float]:
        """d/dr of both polynomial components at r."""
        t = (r - self.r0) / self.h
        cu, cp = self.cu, self.cp
        du = (cu[1] + t * (2 * cu[2] + t * (3 * cu[3] + t * 4 * cu[4]))) / self.h
        dp = (cp[1] + t * (2 * cp[2] + t * (3 * cp[3] + t * 4 * cp[4]))) / self.h
        return du, dp


@dataclass
class RadialProfile:
    """A numerically integrated radial solution with dense output and events.

    ``r``/``u``/``du`` are the accepted nodes (starting at r = 0 with du = 0);
    ``segments`` give piecewise-quartic interpolation over [0, r_end].
    """

    n: int
    alpha: float
    lam: float
    model_descriptor: str
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    r_end: float
    events: list[EventRecord] = field(default_factory=list)
    stopped_by: EventRecord | None = None
    segments: list[_Segment] = field(default_factory=list)
    _seg_starts: list[float] = field(default_factory=list)

    @property
    def nodes(self) -> np.ndarray:
        return np.column_stack([self.r, self.u, self.du])

    def _segment_at(self, r: float) -> _Segment:
        i = bisect_right(self._seg_starts, r) - 1
        if i < 0:
            i = 0
        elif i >= len(self.segments):
            i = len(self.segments) - 1
        return self.segments[i]

    def interpolate(self, r: float) -> tuple[float, float]:
        """Dense-output (u, u') at radius r, clamped to [0, r_end]."""
        r = min(max(r, 0.0), self.r_end)
        return self._segment_at(r).eval(r)

    def value(self, r: float) -> float:
        return self.interpolate(r)[0]

    def sample(self, rs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        us = np.empty(len(rs))
        ps = np.empty(len(rs))
        for i, r in enumerate(rs):
            us[i], ps[i] = self.interpolate(float(r))
        return us, ps

    def ode_residual(self, model: NonlinearityModel, r: float) -> float:
        """u'' + (n-1)/r u' + lam f(u), with u'' from the dense interpolant."""
        if r <= 0.0:
            raise ValueError("residual is defined for r > 0")
        seg = self._segment_at(min(r, self.r_end))
        u, p = seg.eval(r)
        _, dp = seg.eval_derivatives(r)
        return dp + (self.n - 1) / r * p + self.lam * model.f(u)

    def scaled(self, radius: float, new_lam: float) -> "RadialProfile":
        """Map r -> r/radius, u' -> radius * u' (the shoot-and-scale rescaling)."""
        segs = [
            _Segment(
                r0=s.r0 / radius,
                h=s.h / radius,
                cu=s.cu,
                cp=tuple(c * radius for c in s.cp),
            )
            for s in self.segments
        ]
        return RadialProfile(
            n=self.n,
            alpha=self.alpha,
            lam=new_lam,
            model_descriptor=self.model_descriptor,
            r=self.r / radius,
            u=self.u.copy(),
            du=self.du * radius,
            r_end=self.r_end / radius,
            events=[EventRecord(e.kind, e.r / radius, e.u, e.du * radius) for e in self.events],
            stopped_by=None if self.stopped_by is None else EventRecord(
                self.stopped_by.kind, self.stopped_by.r / radius,
                self.stopped_by.u, self.stopped_by.du * radius),
            segments=segs,
            _seg_starts=[s.r0 for s in segs],
        )

    def value_scaled(self, factor: float, new_lam: float) -> "RadialProfile":
        """Pointwise u -> factor * u on the same radial grid."""
        segs = [
            _Segment(s.r0, s.h, tuple(c * factor for c in s.cu), tuple(c * factor for c in s.cp))
            for s in self.segments
        ]
        return RadialProfile(
            n=self.n,
            alpha=self.alpha * factor,
            lam=new_lam,
            model_descriptor=self.model_descriptor,
            r=self.r.copy(),
            u=self.u * factor,
            du=self.du * factor,
            r_end=self.r_end,
            events=list(self.events),
            stopped_by=self.stopped_by,
            segments=segs,
            _seg_starts=[s.r0 for s in segs],
        )

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("r,u,du\n")
            for r, u, du in zip(self.r, self.u, self.du):
                fh.write(f"{float(r)!r},{float(u)!r},{float(du)!r}\n")

    def to_json_record(self) -> dict:
        return {
            "schema_version": "1",
            "model": self.model_descriptor,
            "n": self.n,
            "alpha": self.alpha,
            "lambda": self.lam,
            "r_end": self.r_end,
            "nodes": [[float(a), float(b), float(c)]
                      for a, b, c in zip(self.r, self.u, self.du)],
            "events": [
                {"kind": e.kind.value, "r": e.r, "u": e.u, "du": e.du}
                for e in self.events
            ],
        }


def series_start(model: NonlinearityModel, alpha: float, lam: float, n: int,
                 h: float) -> tuple[float, float]:
    """Two-term Taylor state at r = h for the regular solution from u(0) = alpha.

    u(h)  = alpha - lam f(alpha) h^2 / (2n) + lam^2 f(alpha) f'(alpha) h^4 / (8n(n+2))
    u'(h) = -lam f(alpha) h / n + lam^2 f(alpha) f'(alpha) h^3 / (2n(n+2))

    Truncation error is O(h^6).
    """
    f0 = model.f(alpha)
    f1 = model.df(alpha)
    a2 = -lam * f0 / (2.0 * n)
    a4 = lam * lam * f0 * f1 / (8.0 * n * (n + 2.0))
    u = alpha + h * h * (a2 + h * h * a4)
    du = h * (2.0 * a2 + 4.0 * h * h * a4)
    return u, du


def _start_offset(model: NonlinearityModel, alpha: float, lam: float, n: int,
                  settings: IntegratorSettings) -> float:
    """Series-start offset, shrunk when lam*f(alpha) is so large that the
    default h_init would already overshoot the natural initial-layer scale."""
    h = settings.h_init
    f0 = abs(lam) * abs(model.f(alpha))
    if f0 > 0.0 and alpha > 0.0:
        scale = math.sqrt(2.0 * n * alpha / f0)
        h = min(h, 1e-2 * scale)
    return h


def _refine_crossing(seg: _Segment, comp: int, offset: float,
                     th_lo: float, th_hi: float, g_lo: float, g_hi: float,
                     r_tol: float) -> float:
    """Bisection-safeguarded secant for g(theta) = y[comp](theta) + offset = 0."""
    def g(th: float) -> float:
        y = seg.eval(seg.r0 + th * seg.h)
        return y[comp] + offset

    lo, hi = th_lo, th_hi
    glo, ghi = g_lo, g_hi
    th_tol = max(r_tol / abs(seg.h), 1e-15)
    for _ in range(200):
        if hi - lo <= th_tol:
            break
        if ghi != glo:
            th = hi - ghi * (hi - lo) / (ghi - glo)
        else:
            th = 0.5 * (lo + hi)
        # keep the trial strictly inside; fall back to bisection otherwise
        if not (lo + 0.1 * th_tol < th < hi - 0.1 * th_tol):
            th = 0.5 * (lo + hi)
        gm = g(th)
        if gm == 0.0:
            return th
        if glo * gm < 0.0:
            hi, ghi = th, gm
        else:
            lo, glo = th, gm
    return 0.5 * (lo + hi)


def _integrate_second_order(accel, r0: float, u0: float, p0: float, r_end: float,
                            settings: IntegratorSettings,
                            events: tuple[_EventSpec, ...] = ()):
    """Advance (u, u') from r0 to r_end or the first terminal event.

    ``accel(r, u, p)`` returns u''.  Returns (nodes, segments, event_log,
    stopped_by) where nodes is a list of (r, u, p).
    """
    atol, rtol = settings.abs_tol, settings.rel_tol
    r, u, p = r0, u0, p0
    k1u, k1p = p, accel(r, u, p)
    if not (math.isfinite(k1u) and math.isfinite(k1p)):
        raise NonFiniteError(f"non-finite right-hand side at start r = {r0:.6g}")

    h = min(r0, r_end - r0)
    if h <= 0.0:
        h = r_end - r0
    err_prev = 1.0
    nodes = [(r, u, p)]
    segments: list[_Segment] = []
    event_log: list[EventRecord] = []
    stopped_by: EventRecord | None = None
    rejected = False

    for _ in range(_MAX_STEPS):
        if r >= r_end:
            break
        if h < settings.h_min * r:
            raise StepSizeUnderflowError(
                f"step {h:.3e} fell below {settings.h_min:.1e} * r at r = {r:.6g}")
        final = r + h >= r_end
        if final:
            h = r_end - r

        bad = False
        try:
            k2u = p + h * _A21 * k1p
            k2p = accel(r + _C2 * h, u + h * _A21 * k1u, k2u)
            k3u = p + h * (_A31 * k1p + _A32 * k2p)
            k3p = accel(r + _C3 * h, u + h * (_A31 * k1u + _A32 * k2u), k3u)
            k4u = p + h * (_A41 * k1p + _A42 * k2p + _A43 * k3p)
            k4p = accel(r + _C4 * h, u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u), k4u)
            k5u = p + h * (_A51 * k1p + _A52 * k2p + _A53 * k3p + _A54 * k4p)
            k5p = accel(r + _C5 * h,
                        u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u), k5u)
            k6u = p + h * (_A61 * k1p + _A62 * k2p + _A63 * k3p + _A64 * k4p + _A65 * k5p)
            k6p = accel(r + h,
                        u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u),
                        k6u)
            u_new = u + h * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u + _B6 * k6u)
            p_new = p + h * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
            k7u = p_new
            k7p = accel(r + h, u_new, p_new)
        except (NonFiniteError, OverflowError):
            bad = True

        if not bad and not (math.isfinite(u_new) and math.isfinite(p_new)
                            and math.isfinite(k7p)):
            bad = True

        if bad:
            h *= _MIN_FACTOR
            rejected = True
            continue

        eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
        ep = h * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p)
        su = atol + rtol * max(abs(u), abs(u_new))
        sp = atol + rtol * max(abs(p), abs(p_new))
        err = math.sqrt(0.5 * ((eu / su) ** 2 + (ep / sp) ** 2))

        if err > 1.0:
            factor = max(_MIN_FACTOR, _SAFETY * err ** (-_PI_ALPHA))
            h *= min(factor, 1.0)
            rejected = True
            continue

        # accepted: build the dense segment for [r, r + h]
        ku = (k1u, k2u, k3u, k4u, k5u, k6u, k7u)
        kp = (k1p, k2p, k3p, k4p, k5p, k6p, k7p)
        cu = [u, 0.0, 0.0, 0.0, 0.0]
        cp = [p, 0.0, 0.0, 0.0, 0.0]
        for i in range(7):
            pi = _P[i]
            kui = h * ku[i]
            kpi = h * kp[i]
            for j in range(4):
                w = pi[j]
                if w != 0.0:
                    cu[j + 1] += kui * w
                    cp[j + 1] += kpi * w
        seg = _Segment(r0=r, h=h, cu=tuple(cu), cp=tuple(cp))

        hit: tuple[float, _EventSpec] | None = None
        for spec in events:
            g0 = (u if spec.comp == 0 else p) + spec.offset
            g1 = (u_new if spec.comp == 0 else p_new) + spec.offset
            crossed = (
                (spec.direction <= 0 and g0 > 0.0 and g1 <= 0.0)
                or (spec.direction >= 0 and g0 < 0.0 and g1 >= 0.0)
            )
            if not crossed:
                continue
            th = _refine_crossing(seg, spec.comp, spec.offset, 0.0, 1.0, g0, g1,
                                  settings.abs_tol)
            r_ev = r + th * h
            if r_ev < spec.min_r:
                continue
            if hit is None or r_ev < hit[0]:
                hit = (r_ev, spec)

        if hit is not None:
            r_ev, spec = hit
            u_ev, p_ev = seg.eval(r_ev)
            record = EventRecord(spec.kind, r_ev, u_ev, p_ev)
            event_log.append(record)
            if spec.terminal:
                segments.append(seg)
                nodes.append((r_ev, u_ev, p_ev))
                stopped_by = record
                break

        segments.append(seg)
        r = r_end if final else r + h
        u, p = u_new, p_new
        k1u, k1p = k7u, k7p
        nodes.append((r, u, p))

        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        if rejected:
            factor = min(factor, 1.0)
        rejected = False
        h *= factor
        err_prev = max(err, 1e-10)
    else:
        raise ShootScaleError(f"step budget of {_MAX_STEPS} exceeded at r = {r:.6g}")

    return nodes, segments, event_log, stopped_by


def integrate(model: NonlinearityModel, alpha: float, lam: float, n: int,
              settings: IntegratorSettings | None = None,
              stop_events: frozenset[EventKind] | set[EventKind] = frozenset(),
              r_end: float | None = None) -> RadialProfile:
    """Integrate the radial IVP from u(0) = alpha, u'(0) = 0.

    Terminates at the first requested event in ``stop_events``, at a safety
    event (Blowup always; RangeExceeded unless a zero crossing was requested),
    or at ``r_end`` (defaults to ``settings.r_max``).
    """
    if settings is None:
        settings = IntegratorSettings()
    if alpha < 0.0:
        raise ValueError(f"alpha must be >= 0, got {alpha!r}")
    if n < 2 or int(n) != n:
        raise ValueError(f"dimension n must be an integer >= 2, got {n!r}")
    n = int(n)
    if r_end is None:
        r_end = settings.r_max

    h0 = _start_offset(model, alpha, lam, n, settings)
    u_h, p_h = series_start(model, alpha, lam, n, h0)

    specs: list[_EventSpec] = []
    want_zero = EventKind.ZERO_CROSSING in stop_events
    if want_zero:
        specs.append(_EventSpec(EventKind.ZERO_CROSSING, comp=0, offset=0.0,
                                direction=-1, terminal=True))
    if EventKind.DERIVATIVE_ZERO in stop_events:
        # u'(0) = 0 always; only interior critical points past the start
        # offset count, in either crossing direction.
        specs.append(_EventSpec(EventKind.DERIVATIVE_ZERO, comp=1, offset=0.0,
                                direction=0, terminal=True, min_r=10.0 * h0))
    specs.append(_EventSpec(EventKind.BLOWUP, comp=0, offset=-settings.u_max,
                            direction=1, terminal=True))
    if not want_zero:
        specs.append(_EventSpec(EventKind.RANGE_EXCEEDED, comp=0,
                                offset=settings.u_margin, direction=-1, terminal=True))

    def accel(r: float, u: float, p: float) -> float:
        return -(n - 1) / r * p - lam * model.f(u)

    nodes, segments, event_log, stopped_by = _integrate_second_order(
        accel, h0, u_h, p_h, r_end, settings, tuple(specs))

    # prepend the exact center node and the series polynomial on [0, h0]
    f0 = model.f(alpha)
    f1 = model.df(alpha)
    a2 = -lam * f0 / (2.0 * n)
    a4 = lam * lam * f0 * f1 / (8.0 * n * (n + 2.0))
    series_seg = _Segment(
        r0=0.0, h=h0,
        cu=(alpha, 0.0, a2 * h0 * h0, 0.0, a4 * h0 ** 4),
        cp=(0.0, 2.0 * a2 * h0, 0.0, 4.0 * a4 * h0 ** 3, 0.0),
    )
    segments = [series_seg] + segments
    nodes = [(0.0, alpha, 0.0)] + nodes

    arr = np.asarray(nodes, dtype=float)
    profile = RadialProfile(
        n=n,
        alpha=alpha,
        lam=lam,
        model_descriptor=model.describe(),
        r=arr[:, 0],
        u=arr[:, 1],
        du=arr[:, 2],
        r_end=float(arr[-1, 0]),
        events=event_log,
        stopped_by=stopped_by,
        segments=segments,
        _seg_starts=[s.r0 for s in segments],
    )
    return profile
