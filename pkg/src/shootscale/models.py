"""Nonlinearity families f(u) with exact derivatives and structural predicates.

Every family is an immutable dataclass exposing closed-form ``f``, ``df``,
``d2f`` and the log-derivative ``log_slope`` (h' with h = log f).  No numerical
differentiation happens here; the finite-difference cross-checks live in the
test suite.

Families
--------
PerturbedGelfand(eps)   f(u) = exp(u / (1 + eps*u)),  eps >= 0
MuForm(eps)             f(w) = exp(-1 / (eps + w)),   eps > 0
Limiting                f(v) = exp(-1 / v), extended by 0 at v <= 0
ExpShift(a)             f(u) = exp(-1 / (u + a)),     a >= 0
Cubic(eps, b, c)        f(u) = (u - eps)(u - b)(c - u),  0 < eps < b < c
PowerSum(p, q)          f(u) = u**p + u**q,           p, q > 0, p != q
Constant(c0)            f(u) = c0,                    c0 > 0
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidOrderError, NonFiniteError, NotApplicableError

__all__ = [
    "NonlinearityModel",
    "PerturbedGelfand",
    "MuForm",
    "Limiting",
    "ExpShift",
    "Cubic",
    "PowerSum",
    "Constant",
    "eval_model",
    "log_concavity_margin",
    "is_log_concave",
    "sturm_roots",
    "inflection_points",
    "model_from_config",
]

# Positive exponents above this limit raise NonFiniteError instead of being
# clamped; negative exponents below the float64 range underflow to an exact 0,
# which is the correct limit for every family defined here.
EXP_OVERFLOW = 700.0
_EXP_UNDERFLOW = -745.0


def _exp(x: float) -> float:
    if x > EXP_OVERFLOW:
        raise NonFiniteError(f"exponent {x:.6g} exceeds the +{EXP_OVERFLOW:.0f} overflow guard")
    if x < _EXP_UNDERFLOW:
        return 0.0
    return math.exp(x)


@dataclass(frozen=True)
class NonlinearityModel:
    """Base class: a pure, immutable nonlinearity with exact derivatives."""

    def f(self, u: float) -> float:
        raise NotImplementedError

    def df(self, u: float) -> float:
        raise NotImplementedError

    def d2f(self, u: float) -> float:
        raise NotImplementedError

    def log_slope(self, u: float) -> float:
        """h'(u) for h = log f; may be ``inf`` where f vanishes."""
        fu = self.f(u)
        if fu == 0.0:
            return math.inf
        return self.df(u) / fu

    def eval(self, u: float, order: int = 0) -> float:
        if order == 0:
            return self.f(u)
        if order == 1:
            return self.df(u)
        if order == 2:
            return self.d2f(u)
        raise InvalidOrderError(f"derivative order must be 0, 1 or 2, got {order!r}")

    def describe(self) -> str:
        """Key-value descriptor accepted back by :func:`model_from_config`."""
        raise NotImplementedError


@dataclass(frozen=True)
class PerturbedGelfand(NonlinearityModel):
    """f(u) = exp(u / (1 + eps*u)); ``eps=0`` is the classical exponential."""

    eps: float

    def __post_init__(self) -> None:
        if not (self.eps >= 0.0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be >= 0, got {self.eps!r}")

    def _t(self, u: float) -> float:
        t = 1.0 + self.eps * u
        if t <= 0.0:
            raise NonFiniteError(f"1 + eps*u = {t:.6g} <= 0 at u = {u:.6g}")
        return t

    def f(self, u: float) -> float:
        return _exp(u / self._t(u))

    def df(self, u: float) -> float:
        t = self._t(u)
        return _exp(u / t) / (t * t)

    def d2f(self, u: float) -> float:
        t = self._t(u)
        return _exp(u / t) * (1.0 - 2.0 * self.eps * t) / (t ** 4)

    def log_slope(self, u: float) -> float:
        t = self._t(u)
        return 1.0 / (t * t)

    def describe(self) -> str:
        return f"family=perturbed_gelfand epsilon={self.eps!r}"


@dataclass(frozen=True)
class _ExpPole(NonlinearityModel):
    """Shared implementation of f(u) = exp(-1 / (u + shift)).

    The function is extended by 0 for u + shift <= 0, which is the smooth
    (flat to all orders) continuation through the pole; it keeps trial
    integrator states just past a zero crossing harmless.
    """

    shift: float

    def f(self, u: float) -> float:
        x = u + self.shift
        if x <= 0.0:
            return 0.0
        return _exp(-1.0 / x)

    def df(self, u: float) -> float:
        x = u + self.shift
        if x <= 0.0:
            return 0.0
        e = _exp(-1.0 / x)
        if e == 0.0:
            return 0.0
        return e / (x * x)

    def d2f(self, u: float) -> float:
        x = u + self.shift
        if x <= 0.0:
            return 0.0
        e = _exp(-1.0 / x)
        if e == 0.0:
            return 0.0
        return e * (1.0 - 2.0 * x) / (x ** 4)

    def log_slope(self, u: float) -> float:
        x = u + self.shift
        if x <= 0.0:
            return math.inf
        return 1.0 / (x * x)


@dataclass(frozen=True)
class MuForm(_ExpPole):
    """f(w) = exp(-1 / (eps + w)) with eps > 0."""

    def __init__(self, eps: float):
        if not (eps > 0.0 and math.isfinite(eps)):
            raise ValueError(f"eps must be > 0, got {eps!r}")
        object.__setattr__(self, "shift", float(eps))

    @property
    def eps(self) -> float:
        return self.shift

    def describe(self) -> str:
        return f"family=mu_form epsilon={self.eps!r}"


@dataclass(frozen=True)
class Limiting(_ExpPole):
    """f(v) = exp(-1 / v), with f and both derivatives defined as 0 at v = 0."""

    def __init__(self):
        object.__setattr__(self, "shift", 0.0)

    def describe(self) -> str:
        return "family=limiting"


@dataclass(frozen=True)
class ExpShift(_ExpPole):
    """f(u) = exp(-1 / (u + a)) with a >= 0."""

    def __init__(self, a: float):
        if not (a >= 0.0 and math.isfinite(a)):
            raise ValueError(f"a must be >= 0, got {a!r}")
        object.__setattr__(self, "shift", float(a))

    @property
    def a(self) -> float:
        return self.shift

    def describe(self) -> str:
        return f"family=exp_shift a={self.a!r}"


@dataclass(frozen=True)
class Cubic(NonlinearityModel):
    """f(u) = (u - eps)(u - b)(c - u) with 0 < eps < b < c."""

    eps: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if not (0.0 < self.eps < self.b < self.c):
            raise ValueError(f"need 0 < eps < b < c, got ({self.eps!r}, {self.b!r}, {self.c!r})")

    def satisfies_separation(self) -> bool:
        """The c > 2b hypothesis; queryable, deliberately not an invariant."""
        return self.c > 2.0 * self.b

    def f(self, u: float) -> float:
        return (u - self.eps) * (u - self.b) * (self.c - u)

    def df(self, u: float) -> float:
        s1 = self.eps + self.b + self.c
        s2 = self.eps * self.b + self.eps * self.c + self.b * self.c
        return -3.0 * u * u + 2.0 * s1 * u - s2

    def d2f(self, u: float) -> float:
        return -6.0 * u + 2.0 * (self.eps + self.b + self.c)

    def describe(self) -> str:
        return f"family=cubic epsilon={self.eps!r} b={self.b!r} c={self.c!r}"


@dataclass(frozen=True)
class PowerSum(NonlinearityModel):
    """f(u) = u**p + u**q with p, q > 0 and p != q, defined for u >= 0."""

    p: float
    q: float

    def __post_init__(self) -> None:
        if not (self.p > 0.0 and self.q > 0.0 and self.p != self.q):
            raise ValueError(f"need p > 0, q > 0, p != q, got ({self.p!r}, {self.q!r})")

    def f(self, u: float) -> float:
        if u <= 0.0:
            return 0.0
        return math.pow(u, self.p) + math.pow(u, self.q)

    def df(self, u: float) -> float:
        if u <= 0.0:
            return 0.0
        return self.p * math.pow(u, self.p - 1.0) + self.q * math.pow(u, self.q - 1.0)

    def d2f(self, u: float) -> float:
        if u <= 0.0:
            return 0.0
        p, q = self.p, self.q
        return p * (p - 1.0) * math.pow(u, p - 2.0) + q * (q - 1.0) * math.pow(u, q - 2.0)

    def describe(self) -> str:
        return f"family=power_sum p={self.p!r} q={self.q!r}"


@dataclass(frozen=True)
class Constant(NonlinearityModel):
    """f(u) = c0 > 0."""

    c0: float

    def __post_init__(self) -> None:
        if not (self.c0 > 0.0 and math.isfinite(self.c0)):
            raise ValueError(f"c0 must be > 0, got {self.c0!r}")

    def f(self, u: float) -> float:
        return self.c0

    def df(self, u: float) -> float:
        return 0.0

    def d2f(self, u: float) -> float:
        return 0.0

    def log_slope(self, u: float) -> float:
        return 0.0

    def describe(self) -> str:
        return f"family=constant c0={self.c0!r}"


def eval_model(model: NonlinearityModel, u: float, order: int = 0) -> float:
    """Closed-form f(u), f'(u) or f''(u)."""
    return model.eval(u, order)


def log_concavity_margin(model: NonlinearityModel, u: float) -> float:
    """f''(u) f(u) - f'(u)**2; strictly negative means log-concave at u.

    Raises :class:`NotApplicableError` where f(u) <= 0 (cubic family between
    its sign changes), since log f is undefined there.
    """
    if u <= 0.0:
        raise ValueError(f"u must be > 0, got {u!r}")
    fu = model.f(u)
    if isinstance(model, Cubic) and fu <= 0.0:
        raise NotApplicableError(f"f({u:.6g}) = {fu:.6g} <= 0; log-concavity undefined")
    return model.d2f(u) * fu - model.df(u) ** 2


def is_log_concave(model: NonlinearityModel) -> bool:
    """Closed-form global predicate: f''f - f'^2 < 0 for all u > 0.

    For PowerSum this is the sufficient criterion
    (p - q)^2 - 2(p + q) + 1 < 0; the pointwise margin can stay negative on a
    slightly larger parameter set, and the tests assert only the implication.
    """
    if isinstance(model, PerturbedGelfand):
        return model.eps > 0.0
    if isinstance(model, _ExpPole):
        return True
    if isinstance(model, PowerSum):
        return (model.p - model.q) ** 2 - 2.0 * (model.p + model.q) + 1.0 < 0.0
    return False


def _sturm_margin(model: NonlinearityModel, u: float) -> float:
    return u * model.df(u) - model.f(u)


def sturm_roots(model: NonlinearityModel, u_lo: float = 1e-6, u_hi: float = 1e6) -> tuple[float, ...]:
    """All u > 0 with u f'(u) = f(u).

    PerturbedGelfand and MuForm reduce to quadratics and are solved exactly;
    other families fall back to a bracketed sign scan on a geometric grid,
    refined by bisection to relative 1e-10.
    """
    if isinstance(model, PerturbedGelfand):
        # u f' = f  <=>  eps^2 u^2 + (2 eps - 1) u + 1 = 0
        return _positive_quadratic_roots(model.eps ** 2, 2.0 * model.eps - 1.0, 1.0)
    if isinstance(model, MuForm):
        # w f' = f  <=>  w^2 + (2 eps - 1) w + eps^2 = 0
        return _positive_quadratic_roots(1.0, 2.0 * model.eps - 1.0, model.eps ** 2)

    grid_n = 600
    ratio = (u_hi / u_lo) ** (1.0 / (grid_n - 1))
    roots: list[float] = []
    u_prev = u_lo
    m_prev = _sturm_margin(model, u_prev)
    for k in range(1, grid_n):
        u_cur = u_lo * ratio ** k
        m_cur = _sturm_margin(model, u_cur)
        # margins that underflow to an exact 0 (deep in an exponential tail)
        # are not roots; only strict sign changes count
        if m_prev * m_cur < 0.0:
            a, b = u_prev, u_cur
            fa = m_prev
            while (b - a) > 1e-10 * b:
                mid = 0.5 * (a + b)
                fm = _sturm_margin(model, mid)
                if fm == 0.0:
                    a = b = mid
                    break
                if fa * fm < 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            roots.append(0.5 * (a + b))
        u_prev, m_prev = u_cur, m_cur
    return tuple(roots)


def _positive_quadratic_roots(a: float, b: float, c: float) -> tuple[float, ...]:
    if a == 0.0:
        if b == 0.0:
            return ()
        r = -c / b
        return (r,) if r > 0.0 else ()
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return ()
    if disc == 0.0:
        r = -b / (2.0 * a)
        return (r,) if r > 0.0 else ()
    s = math.sqrt(disc)
    r1 = (-b - s) / (2.0 * a)
    r2 = (-b + s) / (2.0 * a)
    return tuple(sorted(r for r in (r1, r2) if r > 0.0))


def inflection_points(model: NonlinearityModel) -> tuple[float, ...]:
    """All u > 0 where f'' changes sign, in closed form per family."""
    if isinstance(model, PerturbedGelfand):
        # f'' proportional to 1 - 2 eps (1 + eps u)
        if 0.0 < model.eps < 0.5:
            return ((1.0 - 2.0 * model.eps) / (2.0 * model.eps ** 2),)
        return ()
    if isinstance(model, _ExpPole):
        # f'' proportional to 1 - 2 (u + shift)
        u = 0.5 - model.shift
        return (u,) if u > 0.0 else ()
    if isinstance(model, Cubic):
        return ((model.eps + model.b + model.c) / 3.0,)
    if isinstance(model, PowerSum):
        p, q = model.p, model.q
        if (p - 1.0) * (q - 1.0) < 0.0:
            # p(p-1) u^{p-2} = -q(q-1) u^{q-2}
            u = (-(q * (q - 1.0)) / (p * (p - 1.0))) ** (1.0 / (p - q))
            return (u,)
        return ()
    return ()


_FAMILY_PARAMS = {
    "perturbed_gelfand": ("epsilon",),
    "mu_form": ("epsilon",),
    "limiting": (),
    "exp_shift": ("a",),
    "cubic": ("epsilon", "b", "c"),
    "power_sum": ("p", "q"),
    "constant": ("c0",),
}


def model_from_config(text: str) -> NonlinearityModel:
    """Build a model from ``key=value`` tokens, e.g.
    ``"family=perturbed_gelfand epsilon=0.22"``.

    Tokens may be separated by whitespace or newlines; ``#`` starts a comment
    running to the end of its line.  Unknown keys are errors.
    """
    from .errors import ConfigError

    fields: dict[str, str] = {}
    for line in text.splitlines() or [text]:
        line = line.split("#", 1)[0]
        for token in line.split():
            if "=" not in token:
                raise ConfigError(f"expected key=value, got {token!r}")
            key, value = token.split("=", 1)
            if key in fields:
                raise ConfigError(f"duplicate key {key!r}")
            fields[key] = value

    family = fields.pop("family", None)
    if family is None:
        raise ConfigError("missing 'family' key")
    if family not in _FAMILY_PARAMS:
        raise ConfigError(f"unknown family {family!r}; choose from {sorted(_FAMILY_PARAMS)}")
    wanted = _FAMILY_PARAMS[family]
    unknown = set(fields) - set(wanted)
    if unknown:
        raise ConfigError(f"unknown keys for family {family!r}: {sorted(unknown)}")
    missing = set(wanted) - set(fields)
    if missing:
        raise ConfigError(f"missing keys for family {family!r}: {sorted(missing)}")
    try:
        vals = {k: float(v) for k, v in fields.items()}
    except ValueError as exc:
        raise ConfigError(f"non-numeric parameter: {exc}") from exc

    try:
        if family == "perturbed_gelfand":
            return PerturbedGelfand(vals["epsilon"])
        if family == "mu_form":
            return MuForm(vals["epsilon"])
        if family == "limiting":
            return Limiting()
        if family == "exp_shift":
            return ExpShift(vals["a"])
        if family == "cubic":
            return Cubic(vals["epsilon"], vals["b"], vals["c"])
        if family == "power_sum":
            return PowerSum(vals["p"], vals["q"])
        return Constant(vals["c0"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
