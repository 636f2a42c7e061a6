import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from inertial_flow.dynamics import LogUniformGrid, SolverConfig, State, UniformGrid, integrate, mechanical_energy
from inertial_flow.geometry import GeometryClass, make_power_objective, objective_from_config
from inertial_flow.lyapunov import (LyapunovError, Variant, abc_series, certify_c_bound, certify_lemma_bound,
                                    certify_xi_bound, eval_E, eval_G_series, monotonicity_report,
                                    reverse_trapezoid, select_params)
from inertial_flow.perturbation import DampingSpec, ExpGamma, PerturbationSchedule, PowerLaw, Zero

TIGHT = SolverConfig(1e-10, 1e-16)


def run(obj, damping, schedule, x0, T, grid, solver=TIGHT):
    tr = integrate(obj, damping, schedule, x0, np.zeros(obj.dim), T, solver)
    return tr.resample(grid)


@pytest.fixture(scope="module")
def quad_run():
    obj = make_power_objective(2, [0.0, 0.0])
    d = DampingSpec(4.0, 1.0)
    s = PerturbationSchedule(Zero(), 2)
    return obj, d, s, run(obj, d, s, [1.0, 0.0], 100.0, UniformGrid(0.01))


@pytest.fixture(scope="module")
def quartic_run():
    obj = make_power_objective(4, [0.0, 0.0])
    d = DampingSpec(3.0, 1.0)
    s = PerturbationSchedule(Zero(), 2)
    return obj, d, s, run(obj, d, s, [0.5, 0.5], 1e3, LogUniformGrid(2000), SolverConfig(1e-11, 1e-17))


class TestSelectParams:
    def test_nesterov_sharp(self):
        p = select_params("NesterovSharp", DampingSpec(4.0, 1.0), GeometryClass(2, 2, 1))
        assert (p.p, p.lam, p.xi) == pytest.approx((2.0, 2.0, -2.0))

    def test_flat_theta_one(self):
        p = select_params(Variant.FLAT, DampingSpec(3.0, 1.0), GeometryClass(4, 4, 1))
        assert (p.lam, p.p) == pytest.approx((1.0, 2.0))
        np.testing.assert_allclose(p.xi_at(np.geomspace(1, 1e6, 13)), -1.0)
        assert not p.time_dependent

    def test_flat_needs_gamma_above_two(self):
        with pytest.raises(LyapunovError, match="gamma1 > 2"):
            select_params("Flat", DampingSpec(3.0, 1.0), GeometryClass(2, 2, 1))

    def test_heavy_ball_zero(self):
        p = select_params("HeavyBallSharp0", DampingSpec(2.0, 0.0), GeometryClass(2, 2, 1))
        # lambda = min(gamma K2/(2 alpha), 2 alpha/(gamma+2)) = min(0.5, 1)
        assert (p.p, p.lam, p.xi) == pytest.approx((0.0, 0.5, 0.5 * (0.5 - 2.0)))

    def test_heavy_ball_theta(self):
        d = DampingSpec(2.0, 0.5)
        p = select_params("HeavyBallSharpTheta", d, GeometryClass(2, 2, 1))
        t = np.array([1.0, 4.0, 100.0])
        np.testing.assert_allclose(p.lam_at(t), 2 * d.beta(t) / 4)
        np.testing.assert_allclose(p.xi_at(t), -p.lam_at(t) ** 2)
        assert p.time_dependent

    @pytest.mark.parametrize("variant,damping,geometry", [
        ("NesterovSharp", DampingSpec(4.0, 0.5), GeometryClass(2, 2, 1)),
        ("NesterovSharp", DampingSpec(1.5, 1.0), GeometryClass(2, 2, 1)),
        ("HeavyBallSharp0", DampingSpec(2.0, 1.0), GeometryClass(2, 2, 1)),
        ("HeavyBallSharp0", DampingSpec(2.0, 0.0), GeometryClass(2, 3, 1)),
        ("HeavyBallSharpTheta", DampingSpec(2.0, 0.0), GeometryClass(2, 2, 1)),
    ])
    def test_hypotheses_enforced(self, variant, damping, geometry):
        with pytest.raises(LyapunovError):
            select_params(variant, damping, geometry)

    def test_unknown_variant(self):
        with pytest.raises(LyapunovError):
            select_params("Sharpish", DampingSpec(4.0, 1.0), GeometryClass(2, 2, 1))

    @given(gamma=st.floats(1.0, 2.0), excess=st.floats(1e-3, 10.0))
    def test_k1_positive_in_supercritical_regime(self, gamma, excess):
        alpha = 1 + 2 / gamma + excess
        p = select_params("NesterovSharp", DampingSpec(alpha, 1.0), GeometryClass(gamma, 2, 1))
        assert p.xi < 0 and p.k1 > 0


class TestEnergy:
    @pytest.mark.parametrize("variant,damping,gamma", [
        ("NesterovSharp", DampingSpec(4.0, 1.0), 2), ("HeavyBallSharp0", DampingSpec(2.0, 0.0), 2),
        ("HeavyBallSharpTheta", DampingSpec(2.0, 0.5), 2), ("Flat", DampingSpec(1.0, 0.0), 4)])
    def test_zero_at_minimizer(self, variant, damping, gamma):
        obj = make_power_objective(gamma, [1.0, -1.0])
        params = select_params(variant, damping, obj.geometry)
        assert eval_E(params, obj, State(7.0, obj.minimizer, np.zeros(2))) == 0.0

    def test_hand_value(self):
        obj = make_power_objective(2, [0.0, 0.0])
        params = select_params("NesterovSharp", DampingSpec(4.0, 1.0), obj.geometry)
        assert eval_E(params, obj, State(1.0, np.array([1.0, 0.0]), np.zeros(2))) == pytest.approx(2.0)

    @given(t=st.floats(1e3, 1e8), x=st.lists(st.floats(-1, 1), min_size=2, max_size=2),
           v=st.lists(st.floats(-1, 1), min_size=2, max_size=2))
    def test_heavy_ball_theta_tends_to_mechanical(self, t, x, v):
        obj = make_power_objective(2, [0.0, 0.0])
        d = DampingSpec(2.0, 0.5)
        params = select_params("HeavyBallSharpTheta", d, obj.geometry)
        state = State(t, np.array(x), np.array(v))
        diff = abs(eval_E(params, obj, state) - mechanical_energy(obj, state))
        bound = 2 * float(d.beta(t)) * np.linalg.norm(x) * np.linalg.norm(v) / 4
        assert diff <= bound + 1e-12 * (1 + bound)

    @given(variant=st.sampled_from(["NesterovSharp", "Flat"]), t=st.floats(1.0, 1e4),
           x=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
           v=st.lists(st.floats(-2, 2), min_size=3, max_size=3))
    @settings(max_examples=60)
    def test_time_weighted_decomposition(self, variant, t, x, v):
        gamma = 2 if variant == "NesterovSharp" else 4
        obj = make_power_objective(gamma, [0.1, 0.0, -0.1])
        params = select_params(variant, DampingSpec(4.0, 1.0), obj.geometry)
        abc = abc_series(params, obj, t, [x], [v])
        E = eval_E(params, obj, State(t, np.array(x), np.array(v)))
        recon = t * (abc.a + abc.b + params.xi_at(t) * abc.c)[0]
        assert E == pytest.approx(recon, rel=1e-10, abs=1e-12 * (1 + t**2))

    @given(t=st.floats(1.0, 1e4), x=st.lists(st.floats(-2, 2), min_size=2, max_size=2),
           v=st.lists(st.floats(-2, 2), min_size=2, max_size=2))
    def test_heavy_ball_decomposition(self, t, x, v):
        obj = make_power_objective(2, [0.0, 0.0])
        params = select_params("HeavyBallSharpTheta", DampingSpec(2.0, 0.5), obj.geometry)
        abc = abc_series(params, obj, t, [x], [v])
        E = eval_E(params, obj, State(t, np.array(x), np.array(v)))
        assert E == pytest.approx((abc.a + abc.b + params.xi_at(t) * abc.c)[0], rel=1e-10, abs=1e-12)


class TestGSeries:
    def test_zero_schedule_gives_g_equal_h(self, quad_run):
        obj, d, s, tr = quad_run
        series = eval_G_series(select_params("NesterovSharp", d, obj.geometry), tr, obj, s)
        np.testing.assert_array_equal(series.G, series.H)
        np.testing.assert_allclose(series.H, tr.t**2 * series.E)

    def test_trapezoid_exact_on_constants(self):
        np.testing.assert_allclose(reverse_trapezoid(np.array([2.0, 5.0]), np.array([3.0, 3.0])), [9.0, 0.0])

    def test_tail_matches_independent_quadrature(self):
        obj = make_power_objective(2, [0.0, 0.0])
        d = DampingSpec(4.0, 1.0)
        s = PerturbationSchedule(PowerLaw(0.05, 3.5), 2)
        tr = integrate(obj, d, s, [1.0, 0.0], [0.0, 0.0], 200.0)
        params = select_params("NesterovSharp", d, obj.geometry)
        series = eval_G_series(params, tr, obj, s)
        g = s.eval_many(tr.t)
        integrand = tr.t ** (params.p + 1) * np.sum((params.lam * tr.x + tr.t[:, None] * tr.v) * g, axis=1)
        assert series.G[0] - series.H[0] == pytest.approx(trapezoid(integrand, tr.t), rel=1e-12)
        assert series.G[-1] == series.H[-1]

    def test_unknown_series(self, quad_run):
        obj, d, s, tr = quad_run
        series = eval_G_series(select_params("NesterovSharp", d, obj.geometry), tr, obj, s)
        with pytest.raises(LyapunovError):
            series.series("F")

    def test_csv_and_sidecar(self, quad_run, tmp_path):
        obj, d, s, tr = quad_run
        series = eval_G_series(select_params("NesterovSharp", d, obj.geometry), tr, obj, s)
        path = series.to_csv(tmp_path / "energy.csv")
        assert path.read_text().splitlines()[0] == "t,a,b,c,E,H,G"
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_array_equal(data[:, 6], series.G)
        meta = json.loads(path.with_suffix(".json").read_text())
        assert meta["params"]["variant"] == "NesterovSharp" and meta["tail_horizon"] == 100.0


class TestLemmas:
    def test_lemA1_quadratic(self, quad_run):
        obj, d, s, tr = quad_run
        rep = certify_lemma_bound("LemA1", select_params("NesterovSharp", d, obj.geometry), tr, obj, s)
        assert rep.passed and rep.n_checked == len(tr) - 2

    def test_lemA1_detects_wrong_damping(self):
        # parameters for alpha = 4 on a trajectory with alpha = 1.5 break the inequality
        obj = make_power_objective(2, [0.0, 0.0])
        s = PerturbationSchedule(Zero(), 2)
        tr = run(obj, DampingSpec(1.5, 1.0), s, [1.0, 0.0], 30.0, UniformGrid(0.01))
        params = select_params("NesterovSharp", DampingSpec(4.0, 1.0), obj.geometry)
        assert not certify_lemma_bound("LemA1", params, tr, obj, s).passed

    def test_lemA4_quartic(self, quartic_run):
        obj, d, s, tr = quartic_run
        params = select_params("Flat", d, obj.geometry)
        for lemma in ("LemA1", "LemA4"):
            rep = certify_lemma_bound(lemma, params, tr, obj, s)
            assert rep.passed, rep.max_excess

    def test_lemA2_perturbed(self):
        obj = make_power_objective(2, [0.0, 0.0])
        d = DampingSpec(2.0, 0.0)
        s = PerturbationSchedule(ExpGamma(0.05, 0.95, d), 2)
        tr = run(obj, d, s, [1.0, 0.0], 12.0, UniformGrid(0.002))
        assert certify_lemma_bound("LemA2", select_params("HeavyBallSharp0", d, obj.geometry), tr, obj, s).passed

    def test_lemA3(self):
        obj = make_power_objective(2, [0.0, 0.0])
        d = DampingSpec(2.0, 0.5)
        s = PerturbationSchedule(Zero(), 2)
        tr = run(obj, d, s, [1.0, 0.0], 40.0, UniformGrid(0.005))
        assert certify_lemma_bound("LemA3", select_params("HeavyBallSharpTheta", d, obj.geometry), tr, obj, s).passed

    def test_equilibrium(self):
        obj = make_power_objective(4, [0.0, 0.0])
        d = DampingSpec(3.0, 1.0)
        s = PerturbationSchedule(Zero(), 2)
        tr = run(obj, d, s, [0.0, 0.0], 10.0, UniformGrid(0.1))
        rep = certify_lemma_bound("LemA4", select_params("Flat", d, obj.geometry), tr, obj, s)
        assert rep.passed and rep.max_excess == 0.0

    def test_random_direction_skips_switch_stencils(self):
        obj = make_power_objective(2, [0.0, 0.0])
        d = DampingSpec(4.0, 1.0)
        s = PerturbationSchedule(PowerLaw(0.05, 3.5, "random"), 2, seed=3)
        tr = run(obj, d, s, [1.0, 0.0], 20.0, UniformGrid(0.01))
        rep = certify_lemma_bound("LemA1", select_params("NesterovSharp", d, obj.geometry), tr, obj, s)
        assert rep.passed and rep.n_skipped > 0
        assert rep.n_checked + rep.n_skipped == len(tr) - 2

    def test_wrong_variant(self, quad_run):
        obj, d, s, tr = quad_run
        with pytest.raises(LyapunovError, match="does not apply"):
            certify_lemma_bound("LemA2", select_params("NesterovSharp", d, obj.geometry), tr, obj, s)

    def test_unknown_lemma(self, quad_run):
        obj, d, s, tr = quad_run
        with pytest.raises(LyapunovError, match="unknown lemma"):
            certify_lemma_bound("LemA9", select_params("NesterovSharp", d, obj.geometry), tr, obj, s)

    def test_coarse_grid(self, quad_run):
        obj, d, s, tr = quad_run
        with pytest.raises(LyapunovError, match="too coarse"):
            certify_lemma_bound("LemA1", select_params("NesterovSharp", d, obj.geometry), tr.resample([1.0, 2.0]),
                                obj, s)


class TestBounds:
    def test_c_bound_flat_run(self, quartic_run):
        obj, d, s, tr = quartic_run
        rep = certify_c_bound(select_params("Flat", d, obj.geometry), tr, obj)
        assert rep.passed and rep.max_excess <= 1e-9

    def test_c_bound_equality_structure(self, quartic_run):
        # for F = |x|^4 with K = 1 the two sides coincide: c t^(p2+1) = |x|^2 t^2/2 = rhs
        obj, d, s, tr = quartic_run
        rep = certify_c_bound(select_params("Flat", d, obj.geometry), tr, obj)
        assert abs(rep.max_excess) <= 1e-12

    def test_c_bound_at_minimizer(self):
        obj = make_power_objective(4, [0.0, 0.0])
        d = DampingSpec(3.0, 1.0)
        tr = run(obj, d, PerturbationSchedule(Zero(), 2), [0.0, 0.0], 10.0, UniformGrid(1.0))
        rep = certify_c_bound(select_params("Flat", d, obj.geometry), tr, obj)
        assert rep.passed and rep.max_excess == 0.0

    def test_c_bound_needs_flat_geometry(self, quad_run):
        obj, d, s, tr = quad_run
        with pytest.raises(LyapunovError):
            certify_c_bound(select_params("NesterovSharp", d, obj.geometry), tr, obj)

    def test_xi_bound_theta_one(self):
        rep = certify_xi_bound(select_params("Flat", DampingSpec(3.0, 1.0), GeometryClass(4, 4, 1)))
        # |xi| = 1 against 2 alpha/(gamma1 - 2) = 3
        assert rep.passed and rep.max_excess == pytest.approx(-2.0)

    def test_xi_bound_theta_zero(self):
        rep = certify_xi_bound(select_params("Flat", DampingSpec(1.0, 0.0), GeometryClass(4, 4, 1)))
        assert rep.passed

    def test_xi_bound_precondition(self):
        params = select_params("Flat", DampingSpec(2.0, 1.0), GeometryClass(4, 4, 1))
        with pytest.raises(LyapunovError, match="alpha >="):
            certify_xi_bound(params)

    def test_xi_bound_only_flat(self):
        with pytest.raises(LyapunovError):
            certify_xi_bound(select_params("NesterovSharp", DampingSpec(4.0, 1.0), GeometryClass(2, 2, 1)))


class TestMonotonicity:
    def test_flat_h_from_t0(self, quartic_run):
        obj, d, s, tr = quartic_run
        series = eval_G_series(select_params("Flat", d, obj.geometry), tr, obj, s)
        rep = monotonicity_report(series, which="H")
        assert rep.first_monotone_time is not None and rep.first_monotone_time <= tr.t[1]
        assert rep.n_violations_after == 0

    def test_classical_energy_convex_alpha_three(self):
        obj = objective_from_config({"kind": "power", "gamma": 2, "dim": 2, "geometry": {"gamma1": 1, "gamma2": 2}})
        d = DampingSpec(3.0, 1.0)
        s = PerturbationSchedule(Zero(), 2)
        tr = run(obj, d, s, [1.0, 0.5], 100.0, UniformGrid(0.01))
        params = select_params("NesterovSharp", d, obj.geometry)
        assert params.p == pytest.approx(0.0) and params.xi == pytest.approx(0.0)
        rep = monotonicity_report(eval_G_series(params, tr, obj, s), which="E")
        assert rep.first_monotone_time == tr.t[0] and rep.n_violations_after == 0

    def _series(self, values, quad_run):
        obj, d, s, tr = quad_run
        series = eval_G_series(select_params("NesterovSharp", d, obj.geometry), tr.resample(
            np.linspace(1.0, 2.0, len(values))), obj, s)
        return replace(series, G=np.asarray(values, dtype=float))

    def test_constant_series(self, quad_run):
        rep = monotonicity_report(self._series([3.0] * 10, quad_run))
        assert rep.first_monotone_time == 1.0 and rep.n_violations_after == 0

    def test_late_rise_gives_none(self, quad_run):
        rep = monotonicity_report(self._series([5, 4, 3, 2, 3], quad_run))
        assert rep.first_monotone_time is None

    def test_transient_then_monotone(self, quad_run):
        rep = monotonicity_report(self._series([1, 2, 3, 2, 1, 0.5], quad_run))
        assert rep.first_monotone_time == pytest.approx(1.4)
        assert rep.n_violations_after == 0 and rep.n_pairs_after == 3

    def test_hint_counts_violations_after(self, quad_run):
        rep = monotonicity_report(self._series([1, 2, 3, 2, 1, 0.5], quad_run), t1_hint=1.0)
        assert rep.n_violations_after == 0

    def test_tolerance(self, quad_run):
        rep = monotonicity_report(self._series([1.0, 1.0 + 1e-7, 1.0], quad_run))
        assert rep.first_monotone_time == 1.0
