import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from inertial_flow.geometry import GeometryClass
from inertial_flow.perturbation import (DampingSpec, ExpGamma, ExpWeight, NoWeight, PerturbationError,
                                        PerturbationSchedule, PolyWeight, PowerLaw, Zero, eval_g,
                                        gamma_integral, integrability_margin, required_weight,
                                        schedule_from_config)
from inertial_flow.theorems import HypothesisError


class TestDamping:
    @pytest.mark.parametrize("kwargs", [dict(alpha=0, theta=1), dict(alpha=1, theta=1.5),
                                        dict(alpha=1, theta=-0.1), dict(alpha=1, theta=0, t0=0)])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(PerturbationError):
            DampingSpec(**kwargs)

    def test_beta(self):
        assert DampingSpec(3, 1).beta(2.0) == pytest.approx(1.5)
        assert DampingSpec(2, 0).beta(7.0) == 2.0
        assert DampingSpec(1, 0.5).beta(4.0) == pytest.approx(0.5)


class TestGammaIntegral:
    @pytest.mark.parametrize("alpha,theta,t,expected", [
        (3.0, 1.0, math.e, 3.0),
        (2.0, 0.0, 5.0, 8.0),
        (1.0, 0.5, 4.0, 2.0),
    ])
    def test_closed_forms(self, alpha, theta, t, expected):
        assert gamma_integral(DampingSpec(alpha, theta), t) == pytest.approx(expected, rel=1e-14)

    def test_vectorised(self):
        d = DampingSpec(2.0, 0.5)
        t = np.array([1.0, 4.0, 9.0])
        np.testing.assert_allclose(gamma_integral(d, t), [gamma_integral(d, s) for s in t])

    @given(alpha=st.floats(0.1, 10.0), theta=st.floats(0.0, 1.0), t0=st.floats(0.5, 3.0),
           span=st.floats(1.01, 1e4))
    @settings(max_examples=60, deadline=None)
    def test_matches_quadrature(self, alpha, theta, t0, span):
        d = DampingSpec(alpha, theta, t0)
        T = t0 * span
        # integrate in log-time so quad sees a smooth, well-scaled integrand
        ref, _ = quad(lambda u: alpha * math.exp(u * (1 - theta)), math.log(t0), math.log(T),
                      epsabs=0, epsrel=1e-13)
        assert gamma_integral(d, T) == pytest.approx(ref, rel=1e-8)

    @given(alpha=st.floats(0.1, 10.0), theta=st.floats(0.0, 1.0))
    @settings(max_examples=30)
    def test_strictly_increasing(self, alpha, theta):
        vals = gamma_integral(DampingSpec(alpha, theta), np.geomspace(1.0, 1e6, 200))
        assert vals[0] == 0.0
        assert np.all(np.diff(vals) > 0)


class TestEvalG:
    def test_zero(self):
        np.testing.assert_array_equal(eval_g(PerturbationSchedule(Zero(), 3), 5.0), np.zeros(3))

    def test_powerlaw(self):
        s = PerturbationSchedule(PowerLaw(1.0, 3.0), 2, direction=(1.0, 0.0))
        np.testing.assert_allclose(eval_g(s, 2.0), [0.125, 0.0])

    def test_expgamma(self):
        s = PerturbationSchedule(ExpGamma(1.0, 1.0, DampingSpec(2.0, 0.0)), 2)
        assert np.linalg.norm(eval_g(s, 2.0)) == pytest.approx(math.exp(-2.0), rel=1e-14)

    def test_before_t0_rejected(self):
        with pytest.raises(PerturbationError):
            eval_g(PerturbationSchedule(PowerLaw(1.0, 2.0), 1), 0.5)

    def test_direction_normalised(self):
        s = PerturbationSchedule(PowerLaw(1.0, 0.0), 2, direction=(3.0, 4.0))
        np.testing.assert_allclose(eval_g(s, 1.0), [0.6, 0.8])

    @given(seed=st.integers(0, 2**20), t=st.floats(1.0, 1e4))
    @settings(max_examples=50)
    def test_random_direction_contract(self, seed, t):
        s = PerturbationSchedule(PowerLaw(2.0, 1.0, "random"), 3, seed=seed)
        g = eval_g(s, t)
        assert np.linalg.norm(g) == pytest.approx(2.0 / t, rel=1e-12)
        # same piece, same direction; depends on (seed, piece) only
        t_same = (s.piece(t) + 0.5) * s.dir_interval
        if t_same >= 1.0:
            np.testing.assert_allclose(g / np.linalg.norm(g), s.unit(s.piece(t_same)))
        twin = PerturbationSchedule(PowerLaw(5.0, 3.0, "random"), 3, seed=seed)
        np.testing.assert_array_equal(s.unit(s.piece(t)), twin.unit(twin.piece(t)))

    def test_eval_many_matches_eval_g(self):
        s = PerturbationSchedule(PowerLaw(0.3, 2.0, "random"), 2, seed=4)
        t = np.linspace(1.0, 5.0, 57)
        np.testing.assert_allclose(s.eval_many(t), np.array([eval_g(s, x) for x in t]), rtol=1e-15)


class TestIntegrability:
    def test_powerlaw_vs_poly(self):
        res = integrability_margin(PerturbationSchedule(PowerLaw(1.0, 3.5), 2), PolyWeight(2.0))
        assert res.finite and res.margin == pytest.approx(0.5)

    def test_borderline_is_not_finite(self):
        assert not integrability_margin(PerturbationSchedule(PowerLaw(1.0, 3.0), 2), PolyWeight(2.0)).finite

    def test_exp_growing(self):
        d = DampingSpec(2.0, 0.0)
        assert not integrability_margin(PerturbationSchedule(ExpGamma(1.0, 0.8, d), 2), ExpWeight(0.9, d)).finite

    def test_zero_always_finite(self):
        d = DampingSpec(2.0, 0.5)
        for w in (PolyWeight(10.0), ExpWeight(3.0, d), NoWeight()):
            assert integrability_margin(PerturbationSchedule(Zero(), 1), w).finite

    def test_no_weight_needs_zero(self):
        assert not integrability_margin(PerturbationSchedule(PowerLaw(1.0, 9.0), 1), NoWeight()).finite

    @pytest.mark.parametrize("weight_kind", ["poly", "exp-half", "exp-one"])
    @pytest.mark.parametrize("sched_kind", ["zero", "powerlaw", "expgamma"])
    def test_nine_combinations_against_quadrature(self, weight_kind, sched_kind):
        d_half, d_one = DampingSpec(2.0, 0.5), DampingSpec(3.0, 1.0)
        weight = {"poly": PolyWeight(2.0), "exp-half": ExpWeight(0.5, d_half),
                  "exp-one": ExpWeight(0.5, d_one)}[weight_kind]
        wd = getattr(weight, "damping", d_half)
        variant = {"zero": Zero(), "powerlaw": PowerLaw(1.0, 3.5),
                   "expgamma": ExpGamma(1.0, 0.95, wd)}[sched_kind]
        sched = PerturbationSchedule(variant, 2)
        res = integrability_margin(sched, weight)

        def log_w(t):
            if isinstance(weight, PolyWeight):
                return weight.p * math.log(t)
            return weight.m * gamma_integral(weight.damping, t)

        def partial(T):
            # log-time quadrature of w |g|; exponents are combined before exponentiation to avoid overflow
            def f(u):
                t = math.exp(u)
                n = float(sched.norm(t))
                return 0.0 if n == 0 else math.exp(min(log_w(t) + math.log(n) + u, 700.0))
            val, _ = quad(f, 0.0, math.log(T), limit=500)
            return val

        small, large = partial(1e3), partial(1e6)
        if res.finite:
            assert large <= 2 * small + 1e-12
        else:
            assert large > 1e3 * max(small, 1e-300)

    def test_t5_weight_exceeds_r(self):
        # inf over gamma2 > 2 of r gamma2/(gamma2-2) is r, never attained
        for theta in (0.0, 0.5, 1.0):
            r = (1 + theta) / 2
            ps = [required_weight("T5", DampingSpec(10.0, theta), GeometryClass(4.0, g2, 1.0)).p
                  for g2 in (4.0, 10.0, 100.0, 1e4)]
            assert all(p > r for p in ps)
            assert all(np.diff(ps) < 0)
            assert ps[-1] == pytest.approx(r, rel=1e-3)


class TestRequiredWeight:
    def test_t2(self):
        w = required_weight("T2", DampingSpec(4.0, 1.0), GeometryClass(2.0, 2.0, 1.0))
        assert w == PolyWeight(2.0)

    @pytest.mark.parametrize("theta,p", [(1.0, 2.0), (0.0, 1.0)])
    def test_t5(self, theta, p):
        w = required_weight("T5", DampingSpec(3.0, theta), GeometryClass(4.0, 4.0, 1.0))
        assert w.p == pytest.approx(p)

    def test_t3_default_m(self):
        d = DampingSpec(2.0, 0.0)
        assert required_weight("T3", d, GeometryClass(2.0, 2.0, 1.0)) == ExpWeight(0.5, d)

    def test_t4_needs_zero(self):
        assert required_weight("T4", DampingSpec(3.0, 1.0), GeometryClass(4.0, 4.0, 1.0)) == NoWeight()

    def test_hypotheses_enforced(self):
        with pytest.raises(HypothesisError):
            required_weight("T2", DampingSpec(4.0, 0.0), GeometryClass(2.0, 2.0, 1.0))


class TestScheduleConfig:
    def test_powerlaw(self):
        s = schedule_from_config({"kind": "powerlaw", "c": 0.05, "q": 3.5, "direction": "fixed", "seed": 7}, 2)
        assert s.variant == PowerLaw(0.05, 3.5) and s.seed == 7

    def test_expgamma_takes_run_damping(self):
        d = DampingSpec(2.0, 0.0)
        s = schedule_from_config({"kind": "expgamma", "c": 1, "mprime": 0.95}, 2, d)
        assert s.variant.damping == d

    def test_explicit_direction(self):
        s = schedule_from_config({"kind": "powerlaw", "c": 1, "q": 2, "direction": [0, 2]}, 2)
        np.testing.assert_array_equal(s.unit(), [0.0, 1.0])

    def test_roundtrip(self):
        s = schedule_from_config({"kind": "powerlaw", "c": 0.1, "q": 3.2, "direction": "random",
                                  "dir_interval": 0.5, "seed": 3}, 2)
        assert schedule_from_config(s.to_config(), 2) == s

    @pytest.mark.parametrize("spec", [{"kind": "sine"}, {"kind": "powerlaw", "c": -1, "q": 2},
                                      {"kind": "powerlaw", "c": 1, "q": 2, "direction": "spiral"},
                                      {"kind": "expgamma", "c": 1, "mprime": 1}])
    def test_rejects_bad_specs(self, spec):
        with pytest.raises(PerturbationError):
            schedule_from_config(spec, 2)
