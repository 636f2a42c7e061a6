"""Experiment configuration: a JSON document naming everything a run needs.

Example::

    {
      "name": "nesterov-sharp-quadratic",
      "objective": {"kind": "power", "gamma": 2, "dim": 2},
      "damping": {"alpha": 4, "theta": 1},
      "schedule": {"kind": "powerlaw", "c": 0.05, "q": 3.5},
      "x0": [1, 0], "v0": [0, 0], "T": 10000,
      "solver": {"rel_tol": 1e-8, "abs_tol": 1e-16},
      "theorems": ["T2"],
      "lyapunov": {"variant": "NesterovSharp", "lemmas": ["LemA1"],
                   "grid": {"kind": "uniform", "dt": 0.02}, "monotone": "G"}
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import SolverConfig, grid_from_config
from .geometry import Objective, objective_from_config
from .lyapunov import LEMMA_IDS, Variant
from .perturbation import DampingSpec, PerturbationSchedule, schedule_from_config
from .theorems import THEOREM_IDS

OUT_ENV = "INERTIAL_FLOW_OUT"
DEFAULT_OUT = "out"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LyapunovSpec:
    variant: str
    lemmas: tuple = ()
    grid: dict | None = None  # resampling grid for certification; None keeps the trajectory grid
    c_bound: bool = False
    xi_bound: bool = False
    monotone: str | None = None  # "E", "H" or "G"
    t1_hint: float | None = None

    def to_config(self) -> dict:
        return {"variant": self.variant, "lemmas": list(self.lemmas), "grid": self.grid,
                "c_bound": self.c_bound, "xi_bound": self.xi_bound, "monotone": self.monotone,
                "t1_hint": self.t1_hint}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    objective: dict
    damping: dict
    schedule: dict
    x0: tuple
    v0: tuple
    T: float
    solver: dict = field(default_factory=dict)
    theorems: tuple = ()
    m: float | None = None
    windows: dict = field(default_factory=dict)  # {"poly": [lo, hi], "exp-gamma": [lo, hi]}
    slack: dict = field(default_factory=dict)  # per theorem id
    envelope: bool = True
    lyapunov: LyapunovSpec | None = None
    strict: bool = False  # unmet hypotheses of a requested theorem make the run an error
    output_dir: str | None = None
    description: str = ""

    # -- built objects --
    def build_objective(self) -> Objective:
        return objective_from_config(self.objective)

    def build_damping(self) -> DampingSpec:
        d = self.damping
        return DampingSpec(float(d["alpha"]), float(d["theta"]), float(d.get("t0", 1.0)))

    def build_schedule(self, dim: int, damping: DampingSpec) -> PerturbationSchedule:
        return schedule_from_config(self.schedule, dim, damping)

    def build_solver(self) -> SolverConfig:
        return SolverConfig.from_config(self.solver)

    def certification_grid(self):
        if self.lyapunov is None or self.lyapunov.grid is None:
            return None
        return grid_from_config(self.lyapunov.grid)

    def resolved_output_dir(self) -> Path:
        root = os.environ.get(OUT_ENV) or self.output_dir or DEFAULT_OUT
        return Path(root) / self.name

    def to_config(self) -> dict:
        out = {
            "name": self.name, "objective": self.objective, "damping": self.damping,
            "schedule": self.schedule, "x0": list(self.x0), "v0": list(self.v0), "T": self.T,
            "solver": self.solver, "theorems": list(self.theorems), "m": self.m,
            "windows": self.windows, "slack": self.slack, "envelope": self.envelope,
            "strict": self.strict,
        }
        if self.lyapunov is not None:
            out["lyapunov"] = self.lyapunov.to_config()
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        if self.description:
            out["description"] = self.description
        return out


_KNOWN_KEYS = {"name", "objective", "damping", "schedule", "x0", "v0", "T", "solver", "theorems",
               "m", "windows", "slack", "envelope", "lyapunov", "strict", "output_dir", "description"}


def _vector(spec, key, dim):
    if key not in spec:
        return (0.0,) * dim if key == "v0" else None
    vec = np.asarray(spec[key], dtype=float).reshape(-1)
    return tuple(float(x) for x in vec)


def config_from_dict(spec: dict) -> ExperimentConfig:
    """Validate and normalise a config mapping.  Objects are built once to catch errors early."""
    if not isinstance(spec, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(spec) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("name", "objective", "damping", "x0", "T"):
        if key not in spec:
            raise ConfigError(f"missing required key {key!r}")
    theorems = tuple(spec.get("theorems", ()))
    bad = [t for t in theorems if t not in THEOREM_IDS]
    if bad:
        raise ConfigError(f"unknown theorem ids {bad}; known: {THEOREM_IDS}")
    lyap = None
    if spec.get("lyapunov"):
        ls = spec["lyapunov"]
        try:
            Variant(ls["variant"])
        except (KeyError, ValueError):
            raise ConfigError(f"lyapunov.variant must be one of {[v.value for v in Variant]}") from None
        lemmas = tuple(ls.get("lemmas", ()))
        if any(lm not in LEMMA_IDS for lm in lemmas):
            raise ConfigError(f"unknown lemma ids in {list(lemmas)}; known: {LEMMA_IDS}")
        if ls.get("monotone") not in (None, "E", "H", "G"):
            raise ConfigError("lyapunov.monotone must be one of E, H, G")
        lyap = LyapunovSpec(ls["variant"], lemmas, ls.get("grid"), bool(ls.get("c_bound", False)),
                            bool(ls.get("xi_bound", False)), ls.get("monotone"), ls.get("t1_hint"))
    cfg = ExperimentConfig(
        name=str(spec["name"]),
        objective=dict(spec["objective"]),
        damping=dict(spec["damping"]),
        schedule=dict(spec.get("schedule", {"kind": "zero"})),
        x0=_vector(spec, "x0", 0),
        v0=(),
        T=float(spec["T"]),
        solver=dict(spec.get("solver", {})),
        theorems=theorems,
        m=None if spec.get("m") is None else float(spec["m"]),
        windows={k: [float(x) for x in v] for k, v in spec.get("windows", {}).items()},
        slack={k: float(v) for k, v in spec.get("slack", {}).items()},
        envelope=bool(spec.get("envelope", True)),
        lyapunov=lyap,
        strict=bool(spec.get("strict", False)),
        output_dir=spec.get("output_dir"),
        description=str(spec.get("description", "")),
    )
    try:
        obj = cfg.build_objective()
        damping = cfg.build_damping()
        cfg.build_schedule(obj.dim, damping)
        cfg.build_solver()
        cfg.certification_grid()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config {cfg.name!r}: {exc!r}") from exc
    v0 = _vector(spec, "v0", obj.dim)
    if len(cfg.x0) != obj.dim or len(v0) != obj.dim:
        raise ConfigError(f"x0/v0 must have {obj.dim} entries")
    return replace(cfg, v0=v0)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(spec)
