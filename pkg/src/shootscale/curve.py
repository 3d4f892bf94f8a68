"""Bifurcation curve tracing over alpha = u(0), fold refinement and shape
classification.

alpha is the global curve parameter everywhere: folds of lam(alpha) are graph
extrema, so no arclength continuation is needed.  A trace samples lam(alpha)
on a geometric grid, inserts points where the discrete curvature is large or
where the outcome flips between descent and no-descent, refines every fold by
golden-section search plus a parabolic vertex polish, and cross-validates each
fold against the linearized boundary value w(1), which must change sign there.
"""
from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketLostError,
    EmptyCurveError,
    NonFiniteError,
    SameClassAtEndsError,
    ShootScaleError,
    StepSizeUnderflowError,
    ConfigError,
)
from .ivp import IntegratorSettings, RadialProfile
from .linearized import solve_linearized
from .models import NonlinearityModel
from .shoot import Outcome, bvp_profile, first_zero, lambda_of_alpha

__all__ = [
    "TraceOptions",
    "CurveSample",
    "CurvePoint",
    "TurningPoint",
    "ShapeClass",
    "BifurcationCurve",
    "ScanRow",
    "ScanResult",
    "Eps0Result",
    "trace",
    "refine_turning_points",
    "classify",
    "solutions_at",
    "scan_epsilon",
    "find_epsilon0",
]


@dataclass(frozen=True)
class TraceOptions:
    initial_points: int = 200
    curvature_tol: float = 0.005
    max_points: int = 2000
    max_rounds: int = 12
    gap_resolution: float = 1e-6
    prominence_rel: float = 1e-7
    fold_alpha_tol: float = 1e-8
    refine_tolerance_factor: float = 0.01
    validate_folds: bool = True

    def __post_init__(self) -> None:
        if self.initial_points < 3:
            raise ValueError("initial_points must be at least 3")


@dataclass(frozen=True)
class CurveSample:
    alpha: float
    lam: float | None
    outcome: str    # "zero" | "no_descent:<reason>" | "error:<reason>"

    @property
    def is_zero(self) -> bool:
        return self.outcome == "zero"


@dataclass(frozen=True)
class CurvePoint:
    alpha: float
    lam: float


@dataclass(frozen=True)
class TurningPoint:
    alpha: float
    lam: float
    kind: str                       # "max" | "min"
    w_boundary: float | None = None
    w_sign_change: bool | None = None


@dataclass(frozen=True)
class ShapeClass:
    kind: str                       # monotone | s_shaped | multi_turn | disconnected
    turn_count: int
    segments: tuple["ShapeClass", ...] = ()

    def label(self) -> str:
        if self.kind == "monotone":
            return "monotone"
        if self.kind == "s_shaped":
            return "S-shaped"
        if self.kind == "multi_turn":
            return f"multi-turn({self.turn_count})"
        inner = ",".join(s.label() for s in self.segments)
        return f"disconnected[{inner}]"


@dataclass
class BifurcationCurve:
    model_descriptor: str
    n: int
    points: list[CurvePoint]
    samples: list[CurveSample]
    gaps: list[tuple[float, float]]
    turning_points: list[TurningPoint] = field(default_factory=list)
    shape: ShapeClass | None = None

    def segments(self) -> list[list[CurvePoint]]:
        """Solution points split at the gaps."""
        if not self.gaps:
            return [self.points]
        cuts = [0.5 * (a + b) for a, b in sorted(self.gaps)]
        segs: list[list[CurvePoint]] = [[] for _ in range(len(cuts) + 1)]
        for pt in self.points:
            segs[bisect_right(cuts, pt.alpha)].append(pt)
        return [s for s in segs if s]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("alpha,lambda,outcome\n")
            for s in self.samples:
                lam = "" if s.lam is None else repr(float(s.lam))
                fh.write(f"{float(s.alpha)!r},{lam},{s.outcome}\n")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "1",
            "model": self.model_descriptor,
            "n": self.n,
            "points": [{"alpha": p.alpha, "lambda": p.lam} for p in self.points],
            "samples": [
                {"alpha": s.alpha, "lambda": s.lam, "outcome": s.outcome}
                for s in self.samples
            ],
            "gaps": [{"alpha_lo": a, "alpha_hi": b} for a, b in self.gaps],
            "turning_points": [
                {
                    "alpha": t.alpha,
                    "lambda": t.lam,
                    "kind": t.kind,
                    "w_boundary": t.w_boundary,
                    "w_sign_change": t.w_sign_change,
                }
                for t in self.turning_points
            ],
            "shape": None if self.shape is None else {
                "kind": self.shape.kind,
                "label": self.shape.label(),
                "turn_count": self.shape.turn_count,
                "segments": [s.label() for s in self.shape.segments],
            },
        }


def _sample_one(model: NonlinearityModel, alpha: float, n: int,
                settings: IntegratorSettings) -> CurveSample:
    try:
        shot = first_zero(model, alpha, n, settings)
    except (NonFiniteError, StepSizeUnderflowError) as exc:
        kind = "non_finite" if isinstance(exc, NonFiniteError) else "step_underflow"
        return CurveSample(alpha, None, f"error:{kind}")
    if shot.outcome is Outcome.ZERO:
        return CurveSample(alpha, shot.lam, "zero")
    return CurveSample(alpha, None, f"no_descent:{shot.reason}")


def _sample_batch_worker(args) -> CurveSample:
    model, alpha, n, settings = args
    return _sample_one(model, alpha, n, settings)


class _Sampler:
    """Evaluates lam(alpha) for batches of alpha, optionally in parallel.

    Results are deterministic regardless of the worker count: samples are
    pure functions of alpha and come back in submission order.
    """

    def __init__(self, model: NonlinearityModel, n: int,
                 settings: IntegratorSettings, jobs: int = 1):
        self.model = model
        self.n = n
        self.settings = settings
        self.jobs = max(1, int(jobs))
        self._pool: ProcessPoolExecutor | None = None

    def __enter__(self):
        if self.jobs > 1:
            self._pool = ProcessPoolExecutor(max_workers=self.jobs)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def batch(self, alphas: Sequence[float]) -> list[CurveSample]:
        if self._pool is None or len(alphas) < 4:
            return [_sample_one(self.model, a, self.n, self.settings) for a in alphas]
        args = [(self.model, a, self.n, self.settings) for a in alphas]
        chunk = max(1, len(args) // (4 * self.jobs))
        return list(self._pool.map(_sample_batch_worker, args, chunksize=chunk))


def _curvature_inserts(samples: list[CurveSample], options: TraceOptions) -> list[float]:
    new: list[float] = []
    for i in range(1, len(samples) - 1):
        s1, s2, s3 = samples[i - 1], samples[i], samples[i + 1]
        if not (s1.is_zero and s2.is_zero and s3.is_zero):
            continue
        a1, a2, a3 = s1.alpha, s2.alpha, s3.alpha
        lam_hat = s1.lam + (s3.lam - s1.lam) * (a2 - a1) / (a3 - a1)
        dev = abs(s2.lam - lam_hat)
        scale = max(abs(s1.lam), abs(s2.lam), abs(s3.lam))
        if dev > options.curvature_tol * scale:
            for lo, hi in ((a1, a2), (a2, a3)):
                if hi - lo > max(1e-6 * hi, 1e-12):
                    new.append(math.sqrt(lo * hi))
    return new


def _outcome_inserts(samples: list[CurveSample], options: TraceOptions) -> list[float]:
    new = []
    for i in range(len(samples) - 1):
        s1, s2 = samples[i], samples[i + 1]
        if s1.is_zero != s2.is_zero and s2.alpha - s1.alpha > options.gap_resolution:
            new.append(0.5 * (s1.alpha + s2.alpha))
    return new


def _merge(samples: list[CurveSample], extra: list[CurveSample]) -> list[CurveSample]:
    by_alpha = {s.alpha: s for s in samples}
    for s in extra:
        by_alpha[s.alpha] = s
    return [by_alpha[a] for a in sorted(by_alpha)]


def trace(model: NonlinearityModel, n: int, alpha_lo: float, alpha_hi: float,
          options: TraceOptions | None = None,
          settings: IntegratorSettings | None = None,
          jobs: int = 1) -> BifurcationCurve:
    """Trace lam(alpha) over [alpha_lo, alpha_hi] and classify the result.

    Raises :class:`EmptyCurveError` when no alpha in the range descends to a
    boundary-value solution.  Samples whose integration fails outright (state
    overflow, step underflow) are recorded as error outcomes and treated like
    no-descent gaps.
    """
    if not (0.0 < alpha_lo < alpha_hi):
        raise ValueError(f"need 0 < alpha_lo < alpha_hi, got ({alpha_lo!r}, {alpha_hi!r})")
    options = options or TraceOptions()
    settings = settings or IntegratorSettings()

    grid = np.geomspace(alpha_lo, alpha_hi, options.initial_points)
    with _Sampler(model, n, settings, jobs) as sampler:
        samples = _merge([], sampler.batch([float(a) for a in grid]))

        for _ in range(options.max_rounds):
            if len(samples) >= options.max_points:
                break
            inserts = _curvature_inserts(samples, options) + _outcome_inserts(samples, options)
            inserts = sorted(set(inserts))[: options.max_points - len(samples)]
            if not inserts:
                break
            samples = _merge(samples, sampler.batch(inserts))

        # polish every remaining outcome boundary down to the gap resolution
        changed = True
        while changed:
            changed = False
            inserts = _outcome_inserts(samples, options)
            if inserts:
                samples = _merge(samples, sampler.batch(inserts))
                changed = True

    points = [CurvePoint(s.alpha, s.lam) for s in samples if s.is_zero]
    if not points:
        raise EmptyCurveError(
            f"no alpha in [{alpha_lo!r}, {alpha_hi!r}] yields a boundary-value solution")

    # a gap is a no-descent run strictly between solution points; leading and
    # trailing no-descent runs are range boundaries, not gaps
    gaps: list[tuple[float, float]] = []
    last_zero: float | None = None
    pending = False
    for s in samples:
        if s.is_zero:
            if pending and last_zero is not None:
                gaps.append((last_zero, s.alpha))
            pending = False
            last_zero = s.alpha
        elif last_zero is not None:
            pending = True

    curve = BifurcationCurve(
        model_descriptor=model.describe(),
        n=n,
        points=points,
        samples=samples,
        gaps=gaps,
    )
    curve.turning_points = refine_turning_points(curve, model, n, options, settings)
    curve.shape = classify(curve)
    return curve


def _golden_extremum(fn: Callable[[float], float], a: float, b: float,
                     sign: float, tol: float) -> float:
    """Golden-section search for a maximum (sign=+1) or minimum (sign=-1)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1 = sign * fn(x1)
    f2 = sign * fn(x2)
    while b - a > tol * max(1.0, abs(a)):
        if f1 > f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = sign * fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = sign * fn(x2)
    return 0.5 * (a + b)


def refine_turning_points(curve: BifurcationCurve, model: NonlinearityModel, n: int,
                          options: TraceOptions | None = None,
                          settings: IntegratorSettings | None = None) -> list[TurningPoint]:
    """Refine every discrete extremum of lam(alpha) and cross-validate it.

    Golden-section search runs at a tightened integration tolerance down to
    ``fold_alpha_tol``; a parabolic vertex fit over a wider spacing then
    suppresses the evaluation noise that golden section alone would inherit.
    Folds whose lam prominence falls below ``prominence_rel`` times lam are
    discarded as tolerance-level jitter.  With ``validate_folds`` each fold is
    checked against the linearized criterion: w(1) must be small at the fold
    and change sign across it.
    """
    options = options or TraceOptions()
    settings = settings or IntegratorSettings()
    fine = settings.with_tolerance_factor(options.refine_tolerance_factor)

    def lam_at(alpha: float) -> float:
        result = lambda_of_alpha(model, alpha, n, fine)
        if result is None:
            raise BracketLostError(f"no descent at alpha = {alpha!r} inside a fold bracket")
        return result[0]

    refined: list[TurningPoint] = []
    for seg in curve.segments():
        for i in range(1, len(seg) - 1):
            p1, p2, p3 = seg[i - 1], seg[i], seg[i + 1]
            if p2.lam > p1.lam and p2.lam > p3.lam:
                kind, sign = "max", 1.0
            elif p2.lam < p1.lam and p2.lam < p3.lam:
                kind, sign = "min", -1.0
            else:
                continue
            a_lo, a_hi = p1.alpha, p3.alpha
            astar = _golden_extremum(lam_at, a_lo, a_hi, sign, options.fold_alpha_tol)
            # parabolic vertex over a wide spacing: the vertex of a quadratic
            # fit is far less sensitive to evaluation noise than the golden
            # bracket itself
            s = max(1e-3 * abs(astar), 10.0 * options.fold_alpha_tol)
            s = min(s, 0.49 * (a_hi - a_lo))
            la, lb, lc = lam_at(astar - s), lam_at(astar), lam_at(astar + s)
            denom = la - 2.0 * lb + lc
            if denom != 0.0:
                vertex = astar + 0.5 * s * (la - lc) / denom
                if a_lo < vertex < a_hi and abs(vertex - astar) < 4.0 * s:
                    astar = vertex
            if not (a_lo < astar < a_hi):
                raise BracketLostError(
                    f"refined fold {astar!r} left its bracket ({a_lo!r}, {a_hi!r})")
            refined.append(TurningPoint(astar, lam_at(astar), kind))

    refined = _prominence_cleanup(refined, options.prominence_rel)

    if options.validate_folds and refined:
        validated = []
        for tp in refined:
            validated.append(_validate_fold(tp, model, n, fine))
        refined = validated
    return refined


def _prominence_cleanup(tps: list[TurningPoint], rel: float) -> list[TurningPoint]:
    """Drop adjacent max/min pairs whose lam separation is below rel * lam."""
    tps = sorted(tps, key=lambda t: t.alpha)
    changed = True
    while changed and len(tps) >= 2:
        changed = False
        for i in range(len(tps) - 1):
            a, b = tps[i], tps[i + 1]
            if a.kind != b.kind and abs(a.lam - b.lam) < rel * max(abs(a.lam), abs(b.lam)):
                del tps[i:i + 2]
                changed = True
                break
    return tps


def _validate_fold(tp: TurningPoint, model: NonlinearityModel, n: int,
                   settings: IntegratorSettings) -> TurningPoint:
    d = max(1e-3 * abs(tp.alpha), 1e-6)

    def w1(alpha: float) -> float | None:
        pair = bvp_profile(model, alpha, n, settings, self_check=False)
        if pair is None:
            return None
        return solve_linearized(model, pair[1], settings).w_at_1

    center = w1(tp.alpha)
    left = w1(tp.alpha - d)
    right = w1(tp.alpha + d)
    flip = (left is not None and right is not None and left * right < 0.0)
    return replace(tp, w_boundary=center, w_sign_change=flip)


def classify(curve: BifurcationCurve) -> ShapeClass:
    """Monotone (no folds, no gaps), S-shaped (a max then a min), otherwise
    multi-turn; gaps splitting the solution set give a disconnected class
    with per-segment sub-shapes."""
    segs = curve.segments()
    if len(segs) >= 2:
        subs = []
        for seg in segs:
            a_lo, a_hi = seg[0].alpha, seg[-1].alpha
            tps = [t for t in curve.turning_points if a_lo <= t.alpha <= a_hi]
            subs.append(_classify_turns(tps))
        return ShapeClass("disconnected", sum(s.turn_count for s in subs), tuple(subs))
    return _classify_turns(curve.turning_points)


def _classify_turns(tps: list[TurningPoint]) -> ShapeClass:
    if not tps:
        return ShapeClass("monotone", 0)
    if len(tps) == 2 and tps[0].kind == "max" and tps[1].kind == "min":
        return ShapeClass("s_shaped", 2)
    return ShapeClass("multi_turn", len(tps))


def solutions_at(curve: BifurcationCurve, model: NonlinearityModel, lam_query: float,
                 settings: IntegratorSettings | None = None,
                 ordering_grid: int = 1000
                 ) -> list[tuple[float, float, RadialProfile]]:
    """All (alpha, lam, profile) with lam(alpha) = lam_query on the traced curve.

    Roots are bracketed on the monotone pieces between refined folds and
    polished with Brent's method on fresh shots.  Whenever two or more
    profiles are returned they are verified to be strictly ordered pointwise
    on a shared radial grid over [0, 1).
    """
    settings = settings or IntegratorSettings()
    n = curve.n

    def g(alpha: float) -> float:
        result = lambda_of_alpha(model, alpha, n, settings)
        if result is None:
            raise ShootScaleError(f"no descent at alpha = {alpha!r} on a traced segment")
        return result[0] - lam_query

    roots: list[float] = []
    for seg in curve.segments():
        breaks = [seg[0].alpha] + [
            t.alpha for t in curve.turning_points
            if seg[0].alpha < t.alpha < seg[-1].alpha
        ] + [seg[-1].alpha]
        lam_of = {p.alpha: p.lam for p in seg}
        for t in curve.turning_points:
            lam_of[t.alpha] = t.lam
        for a_lo, a_hi in zip(breaks[:-1], breaks[1:]):
            g_lo = lam_of[a_lo] - lam_query
            g_hi = lam_of[a_hi] - lam_query
            if g_lo == 0.0:
                roots.append(a_lo)
                continue
            if g_lo * g_hi > 0.0:
                continue
            roots.append(float(brentq(g, a_lo, a_hi, xtol=1e-12, rtol=8.9e-16, maxiter=200)))
        if lam_of[breaks[-1]] == lam_query:
            roots.append(breaks[-1])

    deduped: list[float] = []
    for a in sorted(roots):
        if not deduped or a - deduped[-1] > 1e-6 * max(1.0, a):
            deduped.append(a)

    out: list[tuple[float, float, RadialProfile]] = []
    for a in deduped:
        pair = bvp_profile(model, a, n, settings)
        if pair is not None:
            out.append((a, pair[0], pair[1]))

    if len(out) >= 2:
        rs = np.linspace(0.0, 1.0, ordering_grid + 1)[:-1]
        values = [prof.sample(rs)[0] for _, _, prof in out]
        for lower, upper in zip(values[:-1], values[1:]):
            if not np.all(upper > lower):
                raise ShootScaleError(
                    f"profiles at lam = {lam_query!r} are not strictly ordered")
    return out


@dataclass(frozen=True)
class ScanRow:
    eps: float
    shape: ShapeClass
    turning_points: tuple[TurningPoint, ...]


@dataclass(frozen=True)
class ScanResult:
    rows: tuple[ScanRow, ...]
    monotonicity_warning: str | None = None


def scan_epsilon(model_factory: Callable[[float], NonlinearityModel],
                 eps_values: Iterable[float], n: int,
                 alpha_range: tuple[float, float],
                 options: TraceOptions | None = None,
                 settings: IntegratorSettings | None = None,
                 jobs: int = 1) -> ScanResult:
    """Trace and classify the curve for each eps; tabulate shape and folds.

    When eps_values is increasing, the fold count is expected to be
    non-increasing; a violation is reported as a warning, not an error.
    """
    eps_list = [float(e) for e in eps_values]
    if not eps_list:
        raise ValueError("eps_values must be non-empty")
    options = options or TraceOptions(validate_folds=False)
    rows = []
    for eps in eps_list:
        curve = trace(model_factory(eps), n, alpha_range[0], alpha_range[1],
                      options, settings, jobs)
        rows.append(ScanRow(eps, curve.shape, tuple(curve.turning_points)))

    warning = None
    if eps_list == sorted(eps_list):
        counts = [len(r.turning_points) for r in rows]
        for (e1, c1), (e2, c2) in zip(zip(eps_list, counts), zip(eps_list[1:], counts[1:])):
            if c2 > c1:
                warning = (f"turning-point count increased from {c1} at eps={e1!r} "
                           f"to {c2} at eps={e2!r}")
                warnings.warn(warning)
                break
    return ScanResult(tuple(rows), warning)


@dataclass(frozen=True)
class Eps0Result:
    eps0: float
    bracket_lo: float
    bracket_hi: float
    iterations: int


def find_epsilon0(model_factory: Callable[[float], NonlinearityModel],
                  bracket: tuple[float, float], n: int,
                  alpha_range: tuple[float, float],
                  eps_tol: float = 1e-3,
                  options: TraceOptions | None = None,
                  settings: IntegratorSettings | None = None,
                  jobs: int = 1) -> Eps0Result:
    """Bisect eps between an S-shaped and a monotone classification.

    Raises :class:`SameClassAtEndsError` when both bracket ends classify the
    same way, and :class:`ConfigError` for a degenerate or reversed bracket.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ConfigError(f"bracket must satisfy lo < hi, got ({lo!r}, {hi!r})")
    options = options or TraceOptions(validate_folds=False)

    def is_s_shaped(eps: float) -> bool:
        curve = trace(model_factory(eps), n, alpha_range[0], alpha_range[1],
                      options, settings, jobs)
        return curve.shape.kind == "s_shaped"

    s_lo = is_s_shaped(lo)
    s_hi = is_s_shaped(hi)
    if s_lo == s_hi:
        raise SameClassAtEndsError(
            f"both bracket ends classify the same (S-shaped={s_lo}); "
            "bisection needs a classification change")

    iterations = 0
    while hi - lo > eps_tol:
        mid = 0.5 * (lo + hi)
        iterations += 1
        if is_s_shaped(mid) == s_lo:
            lo = mid
        else:
            hi = mid
    return Eps0Result(0.5 * (lo + hi), lo, hi, iterations)
