import math

import numpy as np
import pytest

from shootscale import (
    Constant,
    Cubic,
    EventKind,
    IntegratorSettings,
    Limiting,
    MuForm,
    NonFiniteError,
    PerturbedGelfand,
    StepSizeUnderflowError,
    integrate,
    series_start,
)
from shootscale.ivp import _integrate_second_order


class TestSeriesStart:
    def test_constant_quadratic_exact(self):
        # f' = 0 kills the quartic term: u(h) = alpha - h^2/4 for n=2, lam=1
        u, du = series_start(Constant(1.0), 1.0, 1.0, 2, 0.01)
        assert u == 1.0 - 0.01 ** 2 / 4.0
        assert du == -0.01 / 2.0

    def test_small_h_consistency(self):
        model = PerturbedGelfand(0.22)
        for h in (1e-6, 1e-8):
            u, du = series_start(model, 2.0, 3.0, 2, h)
            assert u == pytest.approx(2.0, abs=1e-11)
            assert du == pytest.approx(0.0, abs=1e-5)

    def test_gelfand_against_tiny_start_integration(self):
        # integrate from a much smaller offset and compare at r = 0.01
        model = PerturbedGelfand(0.0)
        u_series, du_series = series_start(model, 0.0, 1.0, 2, 0.01)
        assert u_series == pytest.approx(-2.5e-5, rel=1e-4)
        tiny = IntegratorSettings(h_init=1e-6)
        prof = integrate(model, 0.0, 1.0, 2, tiny, r_end=0.01)
        assert prof.u[-1] == pytest.approx(u_series, abs=1e-12)
        assert prof.du[-1] == pytest.approx(du_series, abs=1e-10)


class TestIntegrate:
    def test_constant_zero_at_two(self, settings):
        prof = integrate(Constant(1.0), 1.0, 1.0, 2, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        assert prof.stopped_by is not None
        assert prof.stopped_by.kind is EventKind.ZERO_CROSSING
        assert prof.stopped_by.r == pytest.approx(2.0, abs=1e-9)

    def test_liouville_profile_pointwise(self, settings):
        # u = ln(8b/(lam (1+b r^2)^2)) with b=1 solves the problem with
        # u(0) = 2 ln 2 and lam = 2
        model = PerturbedGelfand(0.0)
        alpha = 2.0 * math.log(2.0)
        prof = integrate(model, alpha, 2.0, 2, settings, r_end=1.0)
        for r in np.linspace(0.0, 1.0, 21):
            exact = math.log(8.0 / (2.0 * (1.0 + r * r) ** 2))
            u, _ = prof.interpolate(float(r))
            assert u == pytest.approx(exact, abs=2e-9)

    def test_cubic_initial_rise_stops_at_peak(self, settings):
        model = Cubic(0.1, 1.0, 2.5)
        prof = integrate(model, 0.5, 1.0, 2, settings,
                         stop_events={EventKind.DERIVATIVE_ZERO})
        assert prof.stopped_by is not None
        assert prof.stopped_by.kind is EventKind.DERIVATIVE_ZERO
        assert prof.stopped_by.u > 0.5
        interior = (prof.r > 1e-3) & (prof.r < 0.5 * prof.stopped_by.r)
        assert np.all(prof.du[interior] > 0.0)

    @pytest.mark.parametrize("n", [2, 3, 5, 9])
    def test_constant_zero_scales_with_dimension(self, n, settings):
        alpha = 1.37
        prof = integrate(Constant(1.0), alpha, 1.0, n, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        assert prof.stopped_by.r == pytest.approx(math.sqrt(2 * n * alpha), abs=1e-9)

    def test_blowup_event(self, settings):
        model = Cubic(0.1, 1.0, 2.5)
        small = IntegratorSettings(u_max=100.0)
        prof = integrate(model, 3.0, 1.0, 2, small,
                         stop_events={EventKind.ZERO_CROSSING,
                                      EventKind.DERIVATIVE_ZERO})
        assert prof.stopped_by is not None
        assert prof.stopped_by.kind is EventKind.BLOWUP
        assert prof.stopped_by.u == pytest.approx(100.0, abs=1e-6)

    def test_range_exceeded_without_zero_request(self, settings):
        prof = integrate(PerturbedGelfand(0.1), 1.0, 1.0, 2, settings)
        assert prof.stopped_by is not None
        assert prof.stopped_by.kind is EventKind.RANGE_EXCEEDED
        assert prof.stopped_by.u == pytest.approx(-settings.u_margin, abs=1e-9)

    def test_monotone_descent_nodes(self, settings):
        for model, alpha in [(PerturbedGelfand(0.22), 5.0), (Limiting(), 1.5),
                             (Constant(2.0), 1.0)]:
            prof = integrate(model, alpha, 1.0, 2, settings,
                             stop_events={EventKind.ZERO_CROSSING})
            assert np.all(prof.du[1:] < 0.0)

    def test_flux_strictly_decreasing(self, settings):
        # (r^{n-1} u')' = -lam r^{n-1} f(u) < 0 for f > 0
        for n in (2, 3):
            prof = integrate(PerturbedGelfand(0.22), 4.0, 1.0, n, settings,
                             stop_events={EventKind.ZERO_CROSSING})
            flux = prof.r ** (n - 1) * prof.du
            assert np.all(np.diff(flux) < 0.0)

    def test_nonfinite_state_error(self):
        with pytest.raises(NonFiniteError):
            integrate(PerturbedGelfand(0.0), 705.0, 1.0, 2)

    def test_step_underflow(self):
        cfg = IntegratorSettings(h_min=5.0, h_init=10.0, r_max=50.0)
        with pytest.raises(StepSizeUnderflowError):
            integrate(Constant(1.0), 1.0, 1.0, 2, cfg,
                      stop_events={EventKind.ZERO_CROSSING})

    def test_rejects_negative_alpha(self, settings):
        with pytest.raises(ValueError):
            integrate(Constant(1.0), -1.0, 1.0, 2, settings)

    def test_node_grid_starts_at_center(self, settings):
        prof = integrate(Constant(1.0), 1.0, 1.0, 2, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        assert prof.r[0] == 0.0
        assert prof.u[0] == 1.0
        assert prof.du[0] == 0.0
        assert np.all(np.diff(prof.r) > 0.0)


class TestDenseOutput:
    def test_continuity_at_nodes(self, settings):
        prof = integrate(PerturbedGelfand(0.22), 5.0, 1.0, 2, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        for r, u, du in zip(prof.r, prof.u, prof.du):
            ui, dui = prof.interpolate(float(r))
            assert ui == pytest.approx(u, rel=1e-12, abs=1e-12)
            assert dui == pytest.approx(du, rel=1e-9, abs=1e-9)

    def test_midpoint_state_consistency(self, settings):
        """Dense-output state at step midpoints matches re-integration from
        the step start to within 10x the local tolerance."""
        model = PerturbedGelfand(0.22)
        prof = integrate(model, 5.0, 1.0, 2, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        n, lam = prof.n, prof.lam

        def accel(r, u, p):
            return -(n - 1) / r * p - lam * model.f(u)

        for seg in prof.segments[1:]:
            rm = seg.r0 + 0.5 * seg.h
            if rm >= prof.r_end:
                break
            u_dense, _ = seg.eval(rm)
            u0, p0 = seg.eval(seg.r0)
            nodes, _, _, _ = _integrate_second_order(accel, seg.r0, u0, p0, rm, settings)
            u_ref = nodes[-1][1]
            assert abs(u_dense - u_ref) < 10.0 * (
                settings.abs_tol + settings.rel_tol * abs(u_ref))


class TestToleranceConvergence:
    CASES = [
        (PerturbedGelfand(0.22), 1.0, 2), (PerturbedGelfand(0.22), 5.0, 2),
        (PerturbedGelfand(0.22), 20.0, 2), (PerturbedGelfand(0.05), 2.0, 2),
        (PerturbedGelfand(0.0), 1.0, 2), (PerturbedGelfand(0.0), 2.0, 3),
        (PerturbedGelfand(0.0), 5.0, 3), (PerturbedGelfand(0.3), 3.0, 2),
        (Limiting(), 1.0, 2), (Limiting(), 1.5, 2), (Limiting(), 3.0, 2),
        (MuForm(0.22), 0.5, 2), (MuForm(0.5), 2.0, 2),
        (Cubic(0.05, 1.0, 2.5), 2.45, 2), (Cubic(0.05, 1.0, 2.5), 0.03, 2),
        (Constant(1.0), 1.0, 2), (Constant(1.0), 1.0, 9),
        (Constant(2.5), 0.7, 3), (PerturbedGelfand(0.15), 40.0, 2),
        (PerturbedGelfand(0.0), 1.3, 5),
    ]

    def test_event_location_stability(self):
        coarse = IntegratorSettings(abs_tol=1e-8, rel_tol=1e-8)
        fine = IntegratorSettings(abs_tol=5e-9, rel_tol=5e-9)
        for model, alpha, n in self.CASES:
            p1 = integrate(model, alpha, 1.0, n, coarse,
                           stop_events={EventKind.ZERO_CROSSING})
            p2 = integrate(model, alpha, 1.0, n, fine,
                           stop_events={EventKind.ZERO_CROSSING})
            assert p1.stopped_by is not None and p2.stopped_by is not None
            r1, r2 = p1.stopped_by.r, p2.stopped_by.r
            assert abs(r1 - r2) < 1e-8 * max(1.0, r1)


class TestEventIdempotence:
    def test_restart_from_interior_node(self, settings):
        model = PerturbedGelfand(0.22)
        prof = integrate(model, 5.0, 1.0, 2, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        n, lam = prof.n, prof.lam

        def accel(r, u, p):
            return -(n - 1) / r * p - lam * model.f(u)

        k = len(prof.r) // 2
        r0, u0, p0 = float(prof.r[k]), float(prof.u[k]), float(prof.du[k])
        nodes, _, _, _ = _integrate_second_order(accel, r0, u0, p0, prof.r_end, settings)
        u_end = nodes[-1][1]
        assert abs(u_end - prof.u[-1]) < 10.0 * (
            settings.abs_tol + settings.rel_tol * abs(prof.u[0]))


class TestSerialization:
    def test_csv(self, tmp_path, settings):
        prof = integrate(Constant(1.0), 1.0, 1.0, 2, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        path = tmp_path / "profile.csv"
        prof.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "r,u,du"
        assert len(lines) == len(prof.r) + 1

    def test_json_record(self, settings):
        prof = integrate(Constant(1.0), 1.0, 1.0, 2, settings,
                         stop_events={EventKind.ZERO_CROSSING})
        doc = prof.to_json_record()
        assert doc["schema_version"] == "1"
        assert doc["events"][0]["kind"] == "zero_crossing"
        assert doc["nodes"][0] == [0.0, 1.0, 0.0]
