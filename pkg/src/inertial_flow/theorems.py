"""Hypothesis table of the convergence theorems.

=====  ===========================================================  ==========================
id     hypotheses                                                   prediction for F(x(t))-F*
=====  ===========================================================  ==========================
T1     theta = 1, H1(gamma), alpha <= 1 + 2/gamma                   t^(-2 gamma alpha/(gamma+2))
T2     theta = 1, H1(gamma), gamma <= 2, H2(2), alpha > 1 + 2/gamma t^(-2 gamma alpha/(gamma+2))
T3     H1(gamma), gamma in [1, 2], H2(2), 0 < m < 2 gamma/(gamma+2)  exp(-m Gamma(t))
T4     g = 0, H1(g1), H2(g2), g1 > 2, g2 >= g1, alpha condition     t^(-2 r g2/(g2-2))
T5     as T4 with integrable g                                      t^(-2 r g2/(g2-2))
C1     as T5 with g1 = g2 = gamma                                   |x'(t)| ~ t^(-r gamma/(gamma-2))
=====  ===========================================================  ==========================

with r = (1 + theta)/2 and the alpha condition "theta < 1, or theta = 1 and
alpha >= (g1+2)/(g1-2)".  T3 is stated for theta < 1; at theta = 1 it still
holds and reads t^(-m alpha), which dispatch reports as a note.
"""

from __future__ import annotations

THEOREM_IDS = ("T1", "T2", "T3", "T4", "T5", "C1")

_EPS = 1e-12


class HypothesisError(ValueError):
    pass


def t3_sup_m(gamma: float) -> float:
    return 2 * gamma / (gamma + 2)


def t3_default_m(gamma: float) -> float:
    return 0.5 * t3_sup_m(gamma)


def violated(theorem_id: str, damping, geometry, m: float | None = None) -> list[str]:
    """Names of the hypotheses of ``theorem_id`` that fail (empty if all hold)."""
    a, th = damping.alpha, damping.theta
    g1, g2 = geometry.gamma1, geometry.gamma2
    bad = []
    if theorem_id in ("T1", "T2"):
        if th != 1:
            bad.append("theta = 1")
        if theorem_id == "T1":
            if not a <= 1 + 2 / g1 + _EPS:
                bad.append("alpha <= 1 + 2/gamma")
        else:
            if not g1 <= 2:
                bad.append("gamma <= 2")
            if abs(g2 - 2) > _EPS:
                bad.append("H2(2)")
            if not a > 1 + 2 / g1 + _EPS:
                bad.append("alpha > 1 + 2/gamma")
    elif theorem_id == "T3":
        if not 1 <= g1 <= 2:
            bad.append("gamma in [1, 2]")
        if abs(g2 - 2) > _EPS:
            bad.append("H2(2)")
        if m is not None and not 0 < m < t3_sup_m(min(max(g1, 1), 2)):
            bad.append("0 < m < 2 gamma/(gamma+2)")
    elif theorem_id in ("T4", "T5", "C1"):
        if not g1 > 2:
            bad.append("gamma1 > 2")
        if not g2 >= g1:
            bad.append("gamma2 >= gamma1")
        if theorem_id == "C1" and abs(g2 - g1) > _EPS:
            bad.append("gamma1 = gamma2")
        if th == 1 and g1 > 2 and not a >= (g1 + 2) / (g1 - 2) - _EPS:
            bad.append("alpha >= (gamma1+2)/(gamma1-2) when theta = 1")
    else:
        raise HypothesisError(f"unknown theorem id {theorem_id!r}; known: {THEOREM_IDS}")
    return bad


def ensure_hypotheses(theorem_id: str, damping, geometry, m: float | None = None) -> None:
    bad = violated(theorem_id, damping, geometry, m)
    if bad:
        raise HypothesisError(f"{theorem_id} hypotheses not met: " + "; ".join(bad))
