"""Shipped experiment configurations.

Seeds, horizons and solver tolerances are pinned so that the acceptance
suite is reproducible.  Every preset is ``strict``: if a declared theorem's
hypotheses fail at runtime the run is an error, not a skip.
"""

from __future__ import annotations

import copy

from .config import ExperimentConfig, config_from_dict

QUADRATIC = {"kind": "power", "gamma": 2, "dim": 2}
QUARTIC = {"kind": "power", "gamma": 4, "dim": 2}
ZERO = {"kind": "zero"}

# Tolerances: the perturbed Nesterov run needs abs_tol far below |x(T)| ~ 1e-8
# for the lemma check; the quartic runs take few, long steps, so a tight
# rel_tol keeps the dense output accurate at little cost.
_OSC = {"rel_tol": 3e-8, "abs_tol": 1e-16}
_FAST = {"rel_tol": 1e-7, "abs_tol": 1e-14}
_SHORT = {"rel_tol": 1e-10, "abs_tol": 1e-16}
_FLAT = {"rel_tol": 1e-11, "abs_tol": 1e-17}

# Flat Nesterov runs stop at 10**3.5: F ~ t^-4 leaves the fit's machine floor
# (1e-14 (1 + F(t0))) near t = 3e3, and a truncated window biases the slope.
FLAT_NESTEROV_T = 10**3.5

_PRESETS = [
    {
        "name": "nesterov-sharp-quadratic",
        "description": "F = |x|^2, theta = 1, alpha = 4, g ~ 0.05 t^-3.5 (T2 rate t^-4)",
        "objective": QUADRATIC,
        "damping": {"alpha": 4.0, "theta": 1.0},
        "schedule": {"kind": "powerlaw", "c": 0.05, "q": 3.5, "direction": "fixed", "seed": 0},
        "x0": [1.0, 0.0], "v0": [0.0, 0.0], "T": 1e4,
        "solver": _OSC,
        "theorems": ["T2"],
        "windows": {"poly": [1e2, 1e4]},
        "lyapunov": {"variant": "NesterovSharp", "lemmas": ["LemA1"],
                     "grid": {"kind": "uniform", "dt": 0.02}, "monotone": "G"},
    },
    {
        "name": "nesterov-subcritical-quadratic",
        "description": "F = |x|^2, theta = 1, alpha = 1.5, g = 0 (T1 rate t^-1.5)",
        "objective": QUADRATIC,
        "damping": {"alpha": 1.5, "theta": 1.0},
        "schedule": ZERO,
        "x0": [1.0, 0.0], "v0": [0.0, 0.0], "T": 1e4,
        "solver": _FAST,
        "theorems": ["T1"],
    },
    {
        "name": "heavy-ball-theta0-quadratic",
        "description": "F = |x|^2, theta = 0, alpha = 2, g ~ 0.05 exp(-0.95 Gamma) (T3, m = 0.5)",
        "objective": QUADRATIC,
        "damping": {"alpha": 2.0, "theta": 0.0},
        "schedule": {"kind": "expgamma", "c": 0.05, "mprime": 0.95, "direction": "fixed", "seed": 0},
        "x0": [1.0, 0.0], "v0": [0.0, 0.0], "T": 16.0,
        "solver": {**_SHORT, "grid": {"kind": "uniform", "dt": 0.01}},
        "theorems": ["T3"], "m": 0.5,
        "lyapunov": {"variant": "HeavyBallSharp0", "lemmas": ["LemA2"],
                     "grid": {"kind": "uniform", "dt": 0.002}, "monotone": "G"},
    },
    {
        "name": "heavy-ball-theta-half-quadratic",
        "description": "F = |x|^2, theta = 0.5, alpha = 2, g = 0 (T3, m = 0.5)",
        "objective": QUADRATIC,
        "damping": {"alpha": 2.0, "theta": 0.5},
        "schedule": ZERO,
        "x0": [1.0, 0.0], "v0": [0.0, 0.0], "T": 80.0,
        "solver": {**_SHORT, "grid": {"kind": "uniform", "dt": 0.05}},
        "theorems": ["T3"], "m": 0.5,
        "lyapunov": {"variant": "HeavyBallSharpTheta", "lemmas": ["LemA3"],
                     "grid": {"kind": "uniform", "dt": 0.005}, "monotone": "G"},
    },
    {
        "name": "flat-quartic-nesterov",
        "description": "F = |x|^4, theta = 1, alpha = 3, g = 0 (T4/T5 rate t^-4, C1 speed t^-2)",
        "objective": QUARTIC,
        "damping": {"alpha": 3.0, "theta": 1.0},
        "schedule": ZERO,
        "x0": [1.0, 0.0], "v0": [0.0, 0.0], "T": FLAT_NESTEROV_T,
        "solver": _FLAT,
        "theorems": ["T4", "T5", "C1"],
        "slack": {"C1": 0.3},
        "lyapunov": {"variant": "Flat", "lemmas": ["LemA1", "LemA4"], "c_bound": True, "xi_bound": True,
                     "grid": {"kind": "log", "points_per_decade": 2000}, "monotone": "H"},
    },
    {
        "name": "flat-quartic-heavy-ball",
        "description": "F = |x|^4, theta = 0, alpha = 1, g = 0 (T4/T5 rate t^-2)",
        "objective": QUARTIC,
        "damping": {"alpha": 1.0, "theta": 0.0},
        "schedule": ZERO,
        "x0": [1.0, 0.0], "v0": [0.0, 0.0], "T": 1e4,
        "solver": _FLAT,
        "theorems": ["T4", "T5", "C1"],
        "slack": {"C1": 0.3},
        "lyapunov": {"variant": "Flat", "lemmas": ["LemA4"], "c_bound": True, "xi_bound": True,
                     "grid": {"kind": "log", "points_per_decade": 2000}},
    },
    {
        "name": "flat-quartic-nesterov-perturbed",
        "description": "F = |x|^4, theta = 1, alpha = 3, g ~ 0.05 t^-3.2 (T5 rate t^-4)",
        "objective": QUARTIC,
        "damping": {"alpha": 3.0, "theta": 1.0},
        "schedule": {"kind": "powerlaw", "c": 0.05, "q": 3.2, "direction": "fixed", "seed": 0},
        "x0": [1.0, 0.0], "v0": [0.0, 0.0], "T": FLAT_NESTEROV_T,
        "solver": _FLAT,
        "theorems": ["T5", "C1"],
        "slack": {"C1": 0.3},
        "lyapunov": {"variant": "Flat", "lemmas": ["LemA4"], "c_bound": True,
                     "grid": {"kind": "log", "points_per_decade": 2000}, "monotone": "G"},
    },
    {
        "name": "flat-anisotropic-heavy-ball",
        "description": "F = x1^4 + x2^6, theta = 0, alpha = 1, g = 0 (T4/T5 rate t^-1.5)",
        "objective": {"kind": "anisotropic", "exponents": [4.0, 6.0]},
        "damping": {"alpha": 1.0, "theta": 0.0},
        "schedule": ZERO,
        "x0": [0.6, 0.6], "v0": [0.0, 0.0], "T": 1e4,
        "solver": _FLAT,
        "theorems": ["T4", "T5"],
        "lyapunov": {"variant": "Flat", "lemmas": ["LemA4"],
                     "grid": {"kind": "log", "points_per_decade": 2000}},
    },
]


def preset_names() -> list[str]:
    return [p["name"] for p in _PRESETS]


def preset_dict(name: str) -> dict:
    for p in _PRESETS:
        if p["name"] == name:
            return copy.deepcopy({**p, "strict": True})
    raise KeyError(f"unknown preset {name!r}; known: {preset_names()}")


def get_preset(name: str) -> ExperimentConfig:
    return config_from_dict(preset_dict(name))


def all_presets() -> list[ExperimentConfig]:
    return [get_preset(n) for n in preset_names()]
