import math

import numpy as np
import pytest

from shootscale import (
    Constant,
    Cubic,
    ExpShift,
    InvalidOrderError,
    Limiting,
    MuForm,
    NonFiniteError,
    NotApplicableError,
    PerturbedGelfand,
    PowerSum,
    eval_model,
    inflection_points,
    is_log_concave,
    log_concavity_margin,
    model_from_config,
    sturm_roots,
)
from shootscale.errors import ConfigError

ALL_MODELS = [
    PerturbedGelfand(0.22),
    PerturbedGelfand(0.0),
    MuForm(0.22),
    Limiting(),
    ExpShift(0.5),
    Cubic(0.05, 1.0, 2.5),
    PowerSum(1.0, 2.0),
    Constant(1.0),
]


def central_diff(f, u, order, h):
    if order == 1:
        return (f(u + h) - f(u - h)) / (2.0 * h)
    return (f(u + h) - 2.0 * f(u) + f(u - h)) / (h * h)


class TestEval:
    @pytest.mark.parametrize("eps", [0.05, 0.22, 0.25, 0.4])
    def test_perturbed_gelfand_at_zero(self, eps):
        assert eval_model(PerturbedGelfand(eps), 0.0, 0) == 1.0

    def test_limiting_flat_at_zero(self):
        model = Limiting()
        for order in (0, 1, 2):
            assert eval_model(model, 0.0, order) == 0.0

    def test_cubic_root(self):
        model = Cubic(0.05, 1.0, 2.5)
        assert eval_model(model, 1.0, 0) == 0.0
        assert eval_model(model, 0.05, 0) == 0.0
        assert eval_model(model, 2.5, 0) == 0.0

    def test_pg_quarter_slope_at_four(self):
        # f' = f/(1+eps*u)^2; at eps=0.25, u=4: f(4) = e^2, so f'(4) = e^2/4
        model = PerturbedGelfand(0.25)
        exact = math.exp(2.0) / 4.0
        assert eval_model(model, 4.0, 1) == pytest.approx(exact, rel=1e-14)
        fd = central_diff(model.f, 4.0, 1, 1e-6)
        assert eval_model(model, 4.0, 1) == pytest.approx(fd, rel=1e-8)

    def test_invalid_order(self):
        with pytest.raises(InvalidOrderError):
            eval_model(Constant(1.0), 1.0, 3)

    def test_overflow_guard(self):
        with pytest.raises(NonFiniteError):
            PerturbedGelfand(0.0).f(701.0)
        # negative exponents underflow to an exact zero instead
        assert Limiting().f(1e-6) == 0.0

    def test_limiting_continuity_at_zero(self):
        model = Limiting()
        for v in (1e-3, 2e-3, 5e-3):
            assert 0.0 <= model.f(v) < 1e-80
            assert 0.0 <= model.df(v) < 1e-70
            assert abs(model.d2f(v)) < 1e-60


class TestDerivativesAgainstFiniteDifferences:
    # (grid, local step scale): exp(-1/x) families vary on the scale x^2
    # near their pole, so the step must follow that scale, not |u|
    GRIDS = {
        "gelfand": (np.geomspace(0.01, 50.0, 12), lambda u: max(1.0, abs(u))),
        "pole": (np.geomspace(0.05, 20.0, 12), lambda u: min(max(1.0, u), u * u)),
        "cubic": (np.linspace(0.1, 3.0, 12), lambda u: max(1.0, abs(u))),
        "power": (np.geomspace(0.1, 10.0, 12), lambda u: max(1.0, abs(u))),
    }

    @pytest.mark.parametrize("model,grid", [
        (PerturbedGelfand(0.22), "gelfand"),
        (PerturbedGelfand(0.0), "gelfand"),
        (MuForm(0.3), "pole"),
        (Limiting(), "pole"),
        (ExpShift(0.7), "pole"),
        (Cubic(0.05, 1.0, 2.5), "cubic"),
        (PowerSum(1.0, 2.0), "power"),
        (PowerSum(2.5, 0.5), "power"),
        (Constant(3.0), "cubic"),
    ])
    def test_first_and_second(self, model, grid):
        points, ell = self.GRIDS[grid]
        shift = getattr(model, "shift", 0.0)
        for u in points:
            u = float(u)
            x = u + shift if grid == "pole" else u
            h1 = 3e-6 * ell(x)
            h2 = 2e-4 * ell(x)
            d1 = central_diff(model.f, u, 1, h1)
            d2 = central_diff(model.f, u, 2, h2)
            ref = max(abs(model.f(u)), abs(model.df(u)), 1e-30)
            assert model.df(u) == pytest.approx(d1, rel=1e-6, abs=1e-9 * ref)
            ref2 = max(abs(model.f(u)), abs(model.d2f(u)), 1e-30)
            assert model.d2f(u) == pytest.approx(d2, rel=1e-6, abs=1e-5 * ref2)


class TestLogConcavity:
    def test_power_sum_example(self):
        # (p-q)^2 - 2(p+q) + 1 = -4 < 0 for (1, 2)
        model = PowerSum(1.0, 2.0)
        assert is_log_concave(model)
        for u in np.geomspace(0.01, 100.0, 40):
            assert log_concavity_margin(model, float(u)) < 0.0

    def test_power_sum_failing_pair(self):
        model = PowerSum(1.0, 6.0)
        assert not is_log_concave(model)
        margins = [log_concavity_margin(model, float(u))
                   for u in np.geomspace(0.01, 100.0, 60)]
        assert max(margins) > 0.0

    def test_exp_shift_always(self):
        model = ExpShift(0.0)
        assert is_log_concave(model)
        for u in np.geomspace(0.05, 50.0, 30):
            assert log_concavity_margin(model, float(u)) < 0.0

    def test_perturbed_gelfand_log_grid(self):
        model = PerturbedGelfand(0.22)
        for u in np.geomspace(1e-3, 1e3, 60):
            assert log_concavity_margin(model, float(u)) < 0.0

    def test_classical_gelfand_is_borderline(self):
        model = PerturbedGelfand(0.0)
        assert not is_log_concave(model)
        assert log_concavity_margin(model, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_constant_margin_zero(self):
        assert log_concavity_margin(Constant(1.0), 2.0) == 0.0
        assert not is_log_concave(Constant(1.0))

    def test_cubic_not_applicable_where_negative(self):
        model = Cubic(0.05, 1.0, 2.5)
        with pytest.raises(NotApplicableError):
            log_concavity_margin(model, 0.5)
        # fine where f > 0
        assert isinstance(log_concavity_margin(model, 2.0), float)


class TestSturmRoots:
    def test_quarter_is_double_root_at_four(self):
        assert sturm_roots(PerturbedGelfand(0.25)) == (4.0,)

    def test_above_quarter_empty(self):
        assert sturm_roots(PerturbedGelfand(0.26)) == ()
        assert sturm_roots(PerturbedGelfand(0.30)) == ()

    def test_point_two(self):
        roots = sturm_roots(PerturbedGelfand(0.20))
        assert len(roots) == 2
        assert roots[0] == pytest.approx(1.90983, abs=1e-4)
        assert roots[1] == pytest.approx(13.09017, abs=1e-4)
        # brute-force oracle: sign changes of u f' - f on a fine grid
        model = PerturbedGelfand(0.20)
        us = np.geomspace(0.01, 100.0, 4000)
        margins = np.array([u * model.df(u) - model.f(u) for u in us])
        flips = us[:-1][np.sign(margins[:-1]) * np.sign(margins[1:]) < 0]
        assert len(flips) == 2
        assert abs(flips[0] - roots[0]) < 0.05
        assert abs(flips[1] - roots[1]) < 0.5

    @pytest.mark.parametrize("eps", [0.05, 0.15, 0.2499, 0.2501, 0.3, 0.5])
    def test_empty_iff_above_quarter(self, eps):
        roots = sturm_roots(PerturbedGelfand(eps))
        if eps > 0.25:
            assert roots == ()
        else:
            assert len(roots) >= 1

    def test_mu_form_matches_rescaled_gelfand(self):
        # w-roots are eps^2 times the u-roots
        eps = 0.2
        ru = sturm_roots(PerturbedGelfand(eps))
        rw = sturm_roots(MuForm(eps))
        assert len(ru) == len(rw) == 2
        for a, b in zip(ru, rw):
            assert b == pytest.approx(eps * eps * a, rel=1e-12)

    def test_limiting_by_scan(self):
        roots = sturm_roots(Limiting())
        assert len(roots) == 1
        assert roots[0] == pytest.approx(1.0, abs=1e-9)


class TestInflectionPoints:
    def test_mu_form(self):
        assert inflection_points(MuForm(0.1)) == pytest.approx((0.4,), abs=1e-12)
        assert inflection_points(Limiting()) == pytest.approx((0.5,), abs=1e-12)

    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.3, 0.49])
    def test_mu_form_closed_form(self, eps):
        pts = inflection_points(MuForm(eps))
        assert pts == pytest.approx((0.5 - eps,), abs=1e-12)

    def test_mu_form_none_above_half(self):
        assert inflection_points(MuForm(0.6)) == ()

    def test_perturbed_gelfand(self):
        pts = inflection_points(PerturbedGelfand(0.2))
        assert pts == pytest.approx((7.5,), abs=1e-12)
        # sign-scan oracle on f''
        model = PerturbedGelfand(0.2)
        assert model.d2f(7.4) > 0.0 > model.d2f(7.6)

    def test_classical_gelfand_none(self):
        assert inflection_points(PerturbedGelfand(0.0)) == ()

    def test_cubic(self):
        model = Cubic(0.05, 1.0, 2.5)
        (pt,) = inflection_points(model)
        assert pt == pytest.approx((0.05 + 1.0 + 2.5) / 3.0, rel=1e-14)
        assert model.d2f(pt - 0.01) > 0.0 > model.d2f(pt + 0.01)


class TestChangeOfVariableIdentity:
    @pytest.mark.parametrize("eps", [0.1, 0.22, 0.3, 1.0])
    def test_pointwise(self, eps):
        # exp(-1/(eps + eps^2 u)) = exp(-1/eps) * exp(u/(1+eps*u))
        pg = PerturbedGelfand(eps)
        mu = MuForm(eps)
        factor = math.exp(-1.0 / eps)
        for u in np.geomspace(0.01, 50.0, 25):
            u = float(u)
            lhs = mu.f(eps * eps * u)
            rhs = factor * pg.f(u)
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestValidation:
    def test_cubic_ordering(self):
        with pytest.raises(ValueError):
            Cubic(1.0, 0.5, 2.5)
        with pytest.raises(ValueError):
            Cubic(0.0, 1.0, 2.5)

    def test_cubic_separation_predicate(self):
        assert Cubic(0.05, 1.0, 2.5).satisfies_separation()
        assert not Cubic(0.05, 1.0, 1.8).satisfies_separation()

    def test_power_sum_needs_distinct(self):
        with pytest.raises(ValueError):
            PowerSum(1.0, 1.0)

    def test_mu_form_needs_positive(self):
        with pytest.raises(ValueError):
            MuForm(0.0)

    def test_constant_positive(self):
        with pytest.raises(ValueError):
            Constant(0.0)


class TestConfigConstruction:
    def test_round_trip(self):
        for model in ALL_MODELS:
            clone = model_from_config(model.describe())
            assert clone == model

    def test_basic(self):
        model = model_from_config("family=perturbed_gelfand epsilon=0.22")
        assert model == PerturbedGelfand(0.22)

    def test_comments_and_lines(self):
        text = "family=cubic  # cubic family\nepsilon=0.05\nb=1.0\nc=2.5\n"
        assert model_from_config(text) == Cubic(0.05, 1.0, 2.5)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            model_from_config("family=limiting epsilon=0.1")

    def test_missing_family(self):
        with pytest.raises(ConfigError):
            model_from_config("epsilon=0.1")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            model_from_config("family=limiting family=limiting")

    def test_missing_param(self):
        with pytest.raises(ConfigError):
            model_from_config("family=cubic epsilon=0.05 b=1.0")
