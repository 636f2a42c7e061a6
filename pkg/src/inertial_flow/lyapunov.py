"""Lyapunov energies along trajectories and numerical certification of their
differential inequalities.

Two energy forms are used.  The time-weighted form (Nesterov and flat
variants) is

    E(t) = t^2 (F - F*) + |lam (x - x*) + t v|^2 / 2 + xi |x - x*|^2 / 2
         = t (a + b + xi c),   a = t (F - F*),
                                b = |lam (x - x*) + t v|^2 / (2t),
                                c = |x - x*|^2 / (2t),

and the heavy-ball form is the same expression without the powers of t, with
a = F - F*, b = |lam (x - x*) + v|^2 / 2, c = |x - x*|^2 / 2.  In both cases
H = t^p E, and G adds the tail integral of the forcing term so that G is
non-increasing whenever the corresponding inequality holds with g = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .dynamics import Trajectory
from .geometry import Objective
from .perturbation import DampingSpec, PerturbationSchedule

TOL_LEMMA_FACTOR = 1e-4
TOL_MONO = 1e-6
TOL_POINTWISE = 1e-9
XI_CHECK_HORIZON = 1e6

_EPS = 1e-12


class LyapunovError(ValueError):
    """Raised when a parameter choice or certification request is inconsistent."""


class Variant(str, Enum):
    NESTEROV_SHARP = "NesterovSharp"
    HEAVY_BALL_SHARP_0 = "HeavyBallSharp0"
    HEAVY_BALL_SHARP_THETA = "HeavyBallSharpTheta"
    FLAT = "Flat"

    @property
    def time_weighted(self) -> bool:
        return self in (Variant.NESTEROV_SHARP, Variant.FLAT)


LEMMA_IDS = ("LemA1", "LemA2", "LemA3", "LemA4")


@dataclass(frozen=True)
class LyapunovParams:
    """Proof parameters of one energy.

    ``lam`` and ``xi`` hold the constant values; for the heavy-ball variant
    with vanishing damping and for the flat variant at theta < 1 they depend
    on time, so use :meth:`lam_at` and :meth:`xi_at`.
    """

    variant: Variant
    p: float
    lam: float
    xi: float
    gamma_used: float
    damping: DampingSpec

    def lam_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.variant is Variant.HEAVY_BALL_SHARP_THETA:
            return 2 * self.damping.beta(t) / (self.gamma_used + 2)
        return np.full_like(t, self.lam)

    def xi_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.variant is Variant.HEAVY_BALL_SHARP_THETA:
            return -self.lam_at(t) ** 2
        if self.variant is Variant.FLAT:
            a, th = self.damping.alpha, self.damping.theta
            return self.lam * (self.lam + 1 - a * t ** (1 - th))
        return np.full_like(t, self.xi)

    @property
    def time_dependent(self) -> bool:
        return self.variant is Variant.HEAVY_BALL_SHARP_THETA or (
            self.variant is Variant.FLAT and self.damping.theta < 1)

    @property
    def k1(self) -> float:
        """xi (p - 2 lam), positive when the sharp Nesterov case applies with alpha > 1 + 2/gamma."""
        return self.xi * (self.p - 2 * self.lam)

    def to_config(self) -> dict:
        out = {"variant": self.variant.value, "p": self.p, "gamma_used": self.gamma_used,
               "damping": self.damping.to_config()}
        if self.time_dependent:
            out["lambda"] = "2*beta(t)/(gamma+2)" if self.variant is Variant.HEAVY_BALL_SHARP_THETA else self.lam
            out["xi"] = ("-lambda(t)^2" if self.variant is Variant.HEAVY_BALL_SHARP_THETA
                         else "lambda*(lambda+1-alpha*t^(1-theta))")
        else:
            out["lambda"] = self.lam
            out["xi"] = self.xi
        return out


def _variant(v) -> Variant:
    try:
        return Variant(v.value if isinstance(v, Variant) else v)
    except ValueError:
        raise LyapunovError(f"unknown variant {v!r}; known: {[m.value for m in Variant]}") from None


def select_params(variant, damping: DampingSpec, geometry, K2: float | None = None) -> LyapunovParams:
    """Proof parameters for ``variant``; hypotheses that fail are named in the error."""
    variant = _variant(variant)
    a, th = damping.alpha, damping.theta
    g = geometry.gamma1
    bad = []
    if variant is Variant.NESTEROV_SHARP:
        if th != 1:
            bad.append("theta = 1")
        if not g <= 2:
            bad.append("gamma <= 2")
        # the boundary alpha = 1 + 2/gamma is kept: it gives the classical energy
        if not a >= 1 + 2 / g - _EPS:
            bad.append("alpha >= 1 + 2/gamma")
        _raise(variant, bad)
        lam = 2 * a / (g + 2)
        return LyapunovParams(variant, 2 * g * a / (g + 2) - 2, lam, lam * (lam + 1 - a), g, damping)

    if variant is Variant.HEAVY_BALL_SHARP_0:
        if th != 0:
            bad.append("theta = 0")
        if not 1 <= g <= 2:
            bad.append("gamma in [1, 2]")
        if K2 is None:
            if abs(geometry.gamma2 - 2) > _EPS:
                bad.append("H2(2) (pass K2 explicitly)")
            K2 = geometry.K2
        if not K2 > 0:
            bad.append("K2 > 0")
        _raise(variant, bad)
        # K2 may be shrunk at will, which caps lambda at 2 alpha/(gamma+2)
        lam = min(g * K2 / (2 * a), 2 * a / (g + 2))
        return LyapunovParams(variant, 0.0, lam, lam * (lam - a), g, damping)

    if variant is Variant.HEAVY_BALL_SHARP_THETA:
        if not 0 < th < 1:
            bad.append("theta in (0, 1)")
        if not 1 <= g <= 2:
            bad.append("gamma in [1, 2]")
        _raise(variant, bad)
        lam0 = 2 * a / (g + 2)  # value at t = 1
        return LyapunovParams(variant, 0.0, lam0, -lam0**2, g, damping)

    if not g > 2:
        bad.append("gamma1 > 2")
    _raise(variant, bad)
    r = (1 + th) / 2
    lam = 2 * r / (g - 2)
    p = 4 * r / (g - 2) + 2 * (r - 1)
    return LyapunovParams(variant, p, lam, lam * (lam + 1 - a), g, damping)


def _raise(variant, bad):
    if bad:
        raise LyapunovError(f"{variant.value} parameters need: " + "; ".join(bad))


# -- energies ----------------------------------------------------------------------

@dataclass(frozen=True)
class AbcSeries:
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    time_weighted: bool


def _as_arrays(t, x, v):
    return np.atleast_1d(np.asarray(t, float)), np.atleast_2d(np.asarray(x, float)), np.atleast_2d(np.asarray(v, float))


def abc_series(params: LyapunovParams, objective: Objective, t, x, v) -> AbcSeries:
    """The quantities a, b, c at each sample (rows of ``x`` and ``v``)."""
    t, x, v = _as_arrays(t, x, v)
    d = x - objective.minimizer
    lam = params.lam_at(t)[:, None]
    gap = np.maximum(objective.gap(x), 0.0)
    dd = np.sum(d * d, axis=1)
    if params.variant.time_weighted:
        w = lam * d + t[:, None] * v
        return AbcSeries(t, t * gap, np.sum(w * w, axis=1) / (2 * t), dd / (2 * t), True)
    w = lam * d + v
    return AbcSeries(t, gap, 0.5 * np.sum(w * w, axis=1), 0.5 * dd, False)


def _energy(params, objective, t, x, v) -> np.ndarray:
    # evaluated from the defining expression, independently of a, b, c
    t, x, v = _as_arrays(t, x, v)
    d = x - objective.minimizer
    lam = params.lam_at(t)[:, None]
    xi = params.xi_at(t)
    gap = objective.gap(x)
    dd = np.sum(d * d, axis=1)
    if params.variant.time_weighted:
        w = lam * d + t[:, None] * v
        return t**2 * gap + 0.5 * np.sum(w * w, axis=1) + 0.5 * xi * dd
    w = lam * d + v
    return gap + 0.5 * np.sum(w * w, axis=1) + 0.5 * xi * dd


def eval_E(params: LyapunovParams, objective: Objective, state) -> float:
    return float(_energy(params, objective, state.t, state.x, state.v)[0])


def _tail_integrand(params, objective, schedule, t, x, v) -> np.ndarray:
    """s^(p+1) <lam d + s v, g> (time-weighted) or s^p <lam d + v, g> (heavy ball)."""
    if schedule.is_zero:
        return np.zeros_like(t)
    d = x - objective.minimizer
    g = schedule.eval_many(t)
    lam = params.lam_at(t)[:, None]
    if params.variant.time_weighted:
        return t ** (params.p + 1) * np.sum((lam * d + t[:, None] * v) * g, axis=1)
    return t**params.p * np.sum((lam * d + v) * g, axis=1)


def reverse_trapezoid(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Composite trapezoid of ``f`` over [t_i, t_last] at every sample i."""
    panels = 0.5 * np.diff(t) * (f[1:] + f[:-1])
    out = np.zeros_like(f)
    out[:-1] = np.cumsum(panels[::-1])[::-1]
    return out


@dataclass(frozen=True)
class EnergySeries:
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    E: np.ndarray
    H: np.ndarray
    G: np.ndarray
    params: LyapunovParams
    T: float

    def series(self, which: str) -> np.ndarray:
        if which not in ("E", "H", "G"):
            raise LyapunovError(f"unknown series {which!r}")
        return getattr(self, which)

    def to_csv(self, path) -> Path:
        """Columns t,a,b,c,E,H,G; parameters go to a JSON file next to it."""
        path = Path(path)
        data = np.column_stack([self.t, self.a, self.b, self.c, self.E, self.H, self.G])
        np.savetxt(path, data, delimiter=",", header="t,a,b,c,E,H,G", comments="", fmt="%.17g")
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps({"params": self.params.to_config(), "tail_horizon": self.T}, indent=2))
        return path


def eval_G_series(params: LyapunovParams, trajectory: Trajectory, objective: Objective,
                  schedule: PerturbationSchedule) -> EnergySeries:
    t, x, v = trajectory.t, trajectory.x, trajectory.v
    abc = abc_series(params, objective, t, x, v)
    E = _energy(params, objective, t, x, v)
    H = t**params.p * E
    tail = reverse_trapezoid(t, _tail_integrand(params, objective, schedule, t, x, v))
    return EnergySeries(t, abc.a, abc.b, abc.c, E, H, H + tail, params, float(t[-1]))


# -- lemma certification -----------------------------------------------------------

@dataclass(frozen=True)
class LemmaReport:
    lemma_id: str
    max_excess: float
    violating_times: list
    n_checked: int
    n_skipped: int = 0

    @property
    def passed(self) -> bool:
        return not self.violating_times

    def to_dict(self) -> dict:
        return asdict(self) | {"passed": self.passed}


_LEMMA_VARIANTS = {
    "LemA1": (Variant.NESTEROV_SHARP, Variant.FLAT),
    "LemA2": (Variant.HEAVY_BALL_SHARP_0,),
    "LemA3": (Variant.HEAVY_BALL_SHARP_THETA,),
    "LemA4": (Variant.FLAT,),
}


def _lemma_sides(lemma_id, params, objective, schedule, t, x, v):
    """Energy whose derivative is bounded, and the pointwise right-hand side.

    For LemA1 and LemA4 the forcing contribution of H' is moved to the right
    so that the check reads G' <= bound.
    """
    dm = params.damping
    alpha, theta = dm.alpha, dm.theta
    gam, p = params.gamma_used, params.p
    d = x - objective.minimizer
    g = schedule.eval_many(t) if not schedule.is_zero else np.zeros_like(x)
    abc = abc_series(params, objective, t, x, v)
    a, b, c = abc.a, abc.b, abc.c
    E = _energy(params, objective, t, x, v)

    if lemma_id in ("LemA1", "LemA4"):
        lam = params.lam
        forcing = t ** (p + 1) * np.sum((lam * d + t[:, None] * v) * g, axis=1)
        if lemma_id == "LemA1":
            xi = lam * (lam + 1 - alpha)
            bound = (2 + p - gam * lam) * a + (p + 2 * lam + 2 - 2 * alpha) * b + xi * (p - 2 * lam) * c
        else:
            s = t ** (1 - theta)
            bound = ((2 + p - gam * lam) * a + (2 * lam + 2 + p - 2 * alpha * s) * b
                     + lam * ((lam + 1) * (p - 2 * lam) - alpha * (p + 1 - theta - 2 * lam) * s) * c)
        return t**p * E, t**p * bound + forcing

    if lemma_id == "LemA2":
        lam, xi = params.lam, params.lam * (params.lam - alpha)
        bound = (-lam * gam * a + 2 * (lam - alpha) * b - 2 * lam * xi * c
                 + np.sum(g * (v + lam * d), axis=1))
        return E, bound

    beta, beta_dot = dm.beta(t), dm.beta_dot(t)
    k = 2 / (gam + 2)
    bound = (-gam * k * beta * E + k * (beta_dot + (gam - 2) / (gam + 2) * beta**2) * np.sum(d * v, axis=1)
             + np.sum(g * (v + (k * beta)[:, None] * d), axis=1))
    return E, bound


def certify_lemma_bound(lemma_id: str, params: LyapunovParams, trajectory: Trajectory,
                        objective: Objective, schedule: PerturbationSchedule) -> LemmaReport:
    """Check a differential inequality at every interior sample.

    The left-hand derivative is the centered difference over the stencil
    (t_{i-1}, t_{i+1}).  It equals the mean of the true derivative over the
    stencil, so it is compared with the mean of the right-hand side over the
    same stencil (Simpson's rule on the three samples).  A sample violates
    when the excess exceeds ``1e-4 (1 + |H_i|) h_i``, h_i being half the
    stencil width.

    Stencils across a direction switch of a random-direction forcing term are
    skipped, since g jumps there; their number is reported.
    """
    if lemma_id not in LEMMA_IDS:
        raise LyapunovError(f"unknown lemma {lemma_id!r}; known: {LEMMA_IDS}")
    if params.variant not in _LEMMA_VARIANTS[lemma_id]:
        raise LyapunovError(f"{lemma_id} does not apply to the {params.variant.value} energy")
    if lemma_id == "LemA1" and params.damping.theta != 1:
        raise LyapunovError("LemA1 needs theta = 1")
    t, x, v = trajectory.t, trajectory.x, trajectory.v
    if t.size < 3:
        raise LyapunovError(f"grid too coarse: {t.size} samples, need at least 3")

    Y, R = _lemma_sides(lemma_id, params, objective, schedule, t, x, v)
    h1, h2 = t[1:-1] - t[:-2], t[2:] - t[1:-1]
    lhs = (Y[2:] - Y[:-2]) / (h1 + h2)
    # non-uniform Simpson weights for the mean over [t_{i-1}, t_{i+1}]
    w0 = (2 - h2 / h1) / 6
    w1 = (h1 + h2) ** 2 / (6 * h1 * h2)
    w2 = (2 - h1 / h2) / 6
    rhs_mean = w0 * R[:-2] + w1 * R[1:-1] + w2 * R[2:]
    excess = lhs - rhs_mean
    tol = TOL_LEMMA_FACTOR * (1 + np.abs(t[1:-1] ** params.p * _energy(params, objective, t[1:-1], x[1:-1], v[1:-1])))
    tol = tol * 0.5 * (h1 + h2)

    keep = np.ones(excess.size, dtype=bool)
    if schedule.is_random:
        pieces = np.floor(t / schedule.dir_interval + 1e-9)
        keep = pieces[:-2] == pieces[2:]
        # a sample sitting exactly on a switch still sees the old direction on its left
        on_switch = np.abs(t[1:-1] / schedule.dir_interval - np.round(t[1:-1] / schedule.dir_interval)) < 1e-9
        keep &= ~on_switch
    bad = keep & (excess > tol)
    max_excess = float(excess[keep].max()) if keep.any() else -math.inf
    return LemmaReport(lemma_id, max_excess, t[1:-1][bad].tolist(), int(keep.sum()), int((~keep).sum()))


@dataclass(frozen=True)
class BoundReport:
    name: str
    max_excess: float
    passed: bool
    n_checked: int

    def to_dict(self) -> dict:
        return asdict(self)


def certify_c_bound(params: LyapunovParams, trajectory: Trajectory, objective: Objective,
                    K: float | None = None) -> BoundReport:
    """t^(p2+1) c <= (K^(-2/g2)/2) (t^(p2+2r-1) a)^(2/g2) with p2 = 4r/(g2-2).

    a and c are taken in the time-weighted form.  Each sample is compared at
    tolerance 1e-9 (1 + |lhs| + |rhs|).
    """
    g2 = objective.geometry.gamma2
    if not g2 > 2:
        raise LyapunovError(f"the c bound needs gamma2 > 2, got {g2}")
    K = objective.geometry.K2 if K is None else K
    r = (1 + params.damping.theta) / 2
    p2 = 4 * r / (g2 - 2)
    t, x = trajectory.t, trajectory.x
    d = x - objective.minimizer
    a = t * np.maximum(objective.gap(x), 0.0)
    c = np.sum(d * d, axis=1) / (2 * t)
    lhs = t ** (p2 + 1) * c
    rhs = 0.5 * K ** (-2 / g2) * (t ** (p2 + 2 * r - 1) * a) ** (2 / g2)
    excess = lhs - rhs
    ok = excess <= TOL_POINTWISE * (1 + np.abs(lhs) + np.abs(rhs))
    return BoundReport("c_bound", float(excess.max()), bool(ok.all()), int(t.size))


def certify_xi_bound(params: LyapunovParams, damping: DampingSpec | None = None,
                     horizon: float = XI_CHECK_HORIZON, n: int = 20001) -> BoundReport:
    """|xi(t)| t^(2(r-1)) <= 2 r alpha/(gamma1-2) on a log grid over [t0, horizon]."""
    if params.variant is not Variant.FLAT:
        raise LyapunovError("the xi bound concerns the Flat energy")
    damping = damping or params.damping
    a, th, g1 = damping.alpha, damping.theta, params.gamma_used
    if th == 1 and not a >= (g1 + 2) / (g1 - 2) - _EPS:
        raise LyapunovError(f"theta = 1 needs alpha >= (gamma1+2)/(gamma1-2) = {(g1 + 2) / (g1 - 2):g}")
    r = (1 + th) / 2
    t = np.geomspace(damping.t0, horizon, n)
    lhs = np.abs(params.xi_at(t)) * t ** (2 * (r - 1))
    bound = 2 * r * a / (g1 - 2)
    excess = lhs - bound
    return BoundReport("xi_bound", float(excess.max()), bool(np.all(excess <= TOL_POINTWISE * (1 + bound))), n)


# -- monotonicity --------------------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    which: str
    first_monotone_time: float | None
    fraction_violations_after: float
    n_violations_after: int
    n_pairs_after: int

    def to_dict(self) -> dict:
        return asdict(self)


def monotonicity_report(series: EnergySeries, t1_hint: float | None = None, which: str = "G") -> MonotonicityReport:
    """Where the chosen energy stops increasing.

    A successive difference violates when Y_{i+1} - Y_i > 1e-6 (1 + |Y_i|).
    ``first_monotone_time`` is the earliest sample time after which no pair
    violates (None if the final pair does).
    """
    Y = series.series(which)
    t = series.t
    viol = np.diff(Y) > TOL_MONO * (1 + np.abs(Y[:-1]))
    idx = np.flatnonzero(viol)
    if idx.size == 0:
        first = float(t[0])
    elif idx[-1] == viol.size - 1:
        first = None
    else:
        first = float(t[idx[-1] + 1])
    start = t1_hint if t1_hint is not None else t[0]
    if first is not None:
        start = max(start, first)
    after = t[:-1] >= start
    n_after = int(after.sum())
    n_bad = int((viol & after).sum())
    frac = n_bad / n_after if n_after else 0.0
    return MonotonicityReport(which, first, frac, n_bad, n_after)
