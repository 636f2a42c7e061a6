"""Which convergence theorem applies to a configuration, what it predicts,
and empirical decay rates fitted from trajectories."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .perturbation import (DampingSpec, ExpWeight, NoWeight, PerturbationSchedule, PolyWeight,
                           gamma_integral, integrability_margin, required_weight)
from .theorems import THEOREM_IDS, t3_default_m, violated

MIN_SAMPLES = 20
MIN_DECADES = 2.0
MIN_GAMMA_SPAN = 5.0
FLOOR_FACTOR = 1e-14
POLY_SLACK = 0.25
EXP_SLACK_FRACTION = 0.1


class RateError(ValueError):
    pass


@dataclass(frozen=True)
class PolyRate:
    """Decay like t^(-exponent) of ``quantity`` ("F_gap" or "speed")."""

    exponent: float
    quantity: str = "F_gap"


@dataclass(frozen=True)
class ExpRate:
    """Decay like exp(-m Gamma(t)) of F_gap."""

    m: float
    damping: DampingSpec
    quantity: str = "F_gap"


@dataclass(frozen=True)
class TheoremCase:
    id: str
    hypotheses: dict
    prediction: PolyRate | ExpRate
    weight: PolyWeight | ExpWeight | NoWeight
    margin: float
    note: str | None = None

    def to_dict(self) -> dict:
        pred = self.prediction
        out = {"id": self.id, "hypotheses": self.hypotheses, "margin": _json_float(self.margin)}
        if isinstance(pred, PolyRate):
            out["prediction"] = {"kind": "poly", "exponent": pred.exponent, "quantity": pred.quantity}
        else:
            out["prediction"] = {"kind": "exp-gamma", "m": pred.m, "quantity": pred.quantity}
        if self.note:
            out["note"] = self.note
        return out


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _weight_dict(w) -> dict:
    if isinstance(w, PolyWeight):
        return {"kind": "poly", "p": w.p}
    if isinstance(w, ExpWeight):
        return {"kind": "exp-gamma", "m": w.m}
    return {"kind": "none (g = 0 required)"}


def _prediction(theorem_id: str, damping: DampingSpec, geometry, m: float):
    a, th = damping.alpha, damping.theta
    g1, g2 = geometry.gamma1, geometry.gamma2
    r = (1 + th) / 2
    if theorem_id in ("T1", "T2"):
        return PolyRate(2 * g1 * a / (g1 + 2))
    if theorem_id == "T3":
        return ExpRate(m, damping)
    if theorem_id in ("T4", "T5"):
        return PolyRate(2 * r * g2 / (g2 - 2))
    return PolyRate(r * g1 / (g1 - 2), "speed")


def dispatch(damping: DampingSpec, geometry, schedule: PerturbationSchedule,
             m: float | None = None) -> list[TheoremCase]:
    """Every theorem whose hypotheses, including its integrability condition, hold.

    ``m`` is the exponential rate claimed for T3; it defaults to half of its
    supremum 2 gamma/(gamma+2).
    """
    cases = []
    for tid in THEOREM_IDS:
        if violated(tid, damping, geometry, m):
            continue
        m_used = (m if m is not None else t3_default_m(geometry.gamma1)) if tid == "T3" else None
        weight = required_weight(tid, damping, geometry, m_used)
        integ = integrability_margin(schedule, weight)
        if not integ.finite:
            continue
        note = None
        if tid == "T3" and damping.theta == 1:
            note = (f"theta = 1: exp(-m Gamma) reads t^(-{m_used * damping.alpha:g}), "
                    "slower than the polynomial rate of T2")
        hyp = {"alpha": damping.alpha, "theta": damping.theta, "gamma1": geometry.gamma1,
               "gamma2": geometry.gamma2, "weight": _weight_dict(weight)}
        cases.append(TheoremCase(tid, hyp, _prediction(tid, damping, geometry, m_used), weight,
                                 integ.margin, note))
    return cases


def predicted_exponent(case: TheoremCase) -> float:
    if not isinstance(case.prediction, PolyRate):
        raise RateError(f"{case.id} predicts an exponential rate, not a polynomial exponent")
    return case.prediction.exponent


def t3_limit_gap(damping: DampingSpec, geometry, m: float) -> float:
    """T2 exponent minus the t-exponent m*alpha of the T3 rate at theta = 1 (positive for admissible m)."""
    g = geometry.gamma1
    return 2 * g * damping.alpha / (g + 2) - m * damping.alpha


# -- fitting -----------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    kind: str
    fitted: float
    window: tuple
    residual_rms: float
    envelope_used: bool
    quantity: str = "F_gap"
    n_used: int = 0
    n_excluded: int = 0

    def to_dict(self, verdict: "Verdict | None" = None, predicted=None) -> dict:
        out = {"kind": self.kind, "fitted": self.fitted, "window": list(self.window),
               "residual_rms": self.residual_rms, "envelope_used": self.envelope_used,
               "quantity": self.quantity, "n_used": self.n_used, "n_excluded": self.n_excluded}
        out["verdict"] = None if verdict is None else ("pass" if verdict.passed else "fail")
        out["predicted"] = predicted if verdict is None else verdict.predicted
        return out

    def to_json(self, verdict=None, predicted=None) -> str:
        return json.dumps(self.to_dict(verdict, predicted), indent=2)


def running_max_backward(y: np.ndarray) -> np.ndarray:
    """max(y[i:]) at every i: the upper envelope seen from the right."""
    return np.maximum.accumulate(y[::-1])[::-1]


def default_window(kind: str, t0: float, T: float, damping: DampingSpec | None = None) -> tuple:
    if kind == "poly":
        return (max(t0, T / 100), T)
    if damping is None:
        raise RateError("exp-gamma fits need the damping law")
    # from where Gamma reaches a tenth of Gamma(T)
    g_T = gamma_integral(damping, T)
    lo, hi = t0, T
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gamma_integral(damping, mid) < 0.1 * g_T:
            lo = mid
        else:
            hi = mid
    return (hi, T)


def fit_series(t, y, kind: str = "poly", window=None, envelope: bool = True,
               damping: DampingSpec | None = None, floor: float | None = None,
               quantity: str = "F_gap") -> RateFit:
    """Least-squares slope of log y against log t ("poly") or Gamma(t) ("exp-gamma").

    Samples at or below ``floor`` (default 1e-14 (1 + y[0])) are dropped.  With
    ``envelope`` the regression runs on the backward running maximum of y
    within the window.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind not in ("poly", "exp-gamma"):
        raise RateError(f"unknown fit kind {kind!r}")
    if kind == "exp-gamma" and damping is None:
        raise RateError("exp-gamma fits need the damping law")
    window = tuple(float(w) for w in (window or default_window(kind, t[0], t[-1], damping)))
    lo, hi = window
    if not (t[0] - 1e-12 * abs(t[0]) <= lo < hi <= t[-1] * (1 + 1e-12)):
        raise RateError(f"window {window} must satisfy t0 <= lo < hi <= T = {t[-1]}")
    if kind == "poly" and math.log10(hi / lo) < MIN_DECADES - 1e-9:
        raise RateError(f"poly window spans {math.log10(hi / lo):.3g} decades, need >= {MIN_DECADES:g}")
    if kind == "exp-gamma":
        span = gamma_integral(damping, hi) - gamma_integral(damping, lo)
        if span < MIN_GAMMA_SPAN - 1e-9:
            raise RateError(f"exp-gamma window spans {span:.3g} Gamma-units, need >= {MIN_GAMMA_SPAN:g}")

    floor = FLOOR_FACTOR * (1 + abs(y[0])) if floor is None else floor
    inside = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    tw, yw = t[inside], y[inside]
    if envelope and yw.size:
        yw = running_max_backward(yw)
    usable = np.isfinite(yw) & (yw > floor)
    if usable.sum() < MIN_SAMPLES:
        raise RateError(f"only {int(usable.sum())} usable samples in window {window} "
                        f"(floor {floor:.3g}), need >= {MIN_SAMPLES}")
    X = np.log(tw[usable]) if kind == "poly" else np.asarray(gamma_integral(damping, tw[usable]))
    Y = np.log(yw[usable])
    Xc = X - X.mean()
    slope = float(np.dot(Xc, Y - Y.mean()) / np.dot(Xc, Xc))
    resid = Y - Y.mean() - slope * Xc
    return RateFit(kind, slope, window, float(np.sqrt(np.mean(resid**2))), bool(envelope), quantity,
                   int(usable.sum()), int((~usable).sum()))


def fit_rate(trajectory: Trajectory, kind: str = "poly", window=None, envelope: bool = True) -> RateFit:
    return fit_series(trajectory.t, trajectory.gap(), kind, window, envelope, trajectory.damping)


def fit_velocity_rate(trajectory: Trajectory, window=None, envelope: bool = True) -> RateFit:
    return fit_series(trajectory.t, trajectory.speed(), "poly", window, envelope, trajectory.damping,
                      quantity="speed")


@dataclass(frozen=True)
class Verdict:
    passed: bool
    detail: str
    predicted: float
    slack: float

    def __bool__(self):
        return self.passed


def default_slack(case: TheoremCase) -> float:
    if isinstance(case.prediction, ExpRate):
        return EXP_SLACK_FRACTION * case.prediction.m
    return POLY_SLACK


def verdict(case: TheoremCase, fit: RateFit, slack: float | None = None) -> Verdict:
    """One-sided: decay at least as fast as predicted, minus ``slack``, passes."""
    pred = case.prediction
    want_kind = "poly" if isinstance(pred, PolyRate) else "exp-gamma"
    if fit.kind != want_kind:
        raise RateError(f"{case.id} predicts a {want_kind} rate but the fit is {fit.kind}")
    if fit.quantity != pred.quantity:
        raise RateError(f"{case.id} concerns {pred.quantity} but the fit is of {fit.quantity}")
    slack = default_slack(case) if slack is None else slack
    rate = pred.exponent if isinstance(pred, PolyRate) else pred.m
    threshold = -(rate - slack)
    ok = fit.fitted <= threshold
    unit = "" if isinstance(pred, PolyRate) else " per Gamma-unit"
    detail = (f"{case.id}: fitted {fit.fitted:.4f}{unit} {'<=' if ok else '>'} {threshold:.4f} "
              f"(predicted {-rate:.4f}, slack {slack:g})")
    return Verdict(bool(ok), detail, rate, slack)

