"""Damping law, forcing term g(t) and the integrability conditions on g."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_DIR_INTERVAL = 0.1


class PerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class DampingSpec:
    """beta(t) = alpha / t**theta on [t0, inf)."""

    alpha: float
    theta: float
    t0: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise PerturbationError(f"alpha must be positive, got {self.alpha}")
        if not 0 <= self.theta <= 1:
            raise PerturbationError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.t0 > 0:
            raise PerturbationError(f"t0 must be positive, got {self.t0}")

    def beta(self, t):
        if self.theta == 0:
            return self.alpha + 0.0 * np.asarray(t, dtype=float)
        return self.alpha / np.asarray(t, dtype=float) ** self.theta

    def beta_dot(self, t):
        t = np.asarray(t, dtype=float)
        return -self.theta * self.alpha / t ** (self.theta + 1)

    def to_config(self) -> dict:
        return {"alpha": self.alpha, "theta": self.theta, "t0": self.t0}


def gamma_integral(damping: DampingSpec, t):
    """Accumulated damping Gamma(t) = int_{t0}^t alpha / s**theta ds."""
    t = np.asarray(t, dtype=float)
    a, th, t0 = damping.alpha, damping.theta, damping.t0
    if th == 1:
        out = a * np.log(t / t0)
    else:
        out = a * (t ** (1 - th) - t0 ** (1 - th)) / (1 - th)
    return float(out) if out.ndim == 0 else out


# -- schedules ---------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class PowerLaw:
    """|g(t)| = c * t**(-q)."""

    c: float
    q: float
    direction_mode: str = "fixed"

    def __post_init__(self):
        if not self.c > 0:
            raise PerturbationError(f"c must be positive, got {self.c}")


@dataclass(frozen=True)
class ExpGamma:
    """|g(t)| = c * exp(-mprime * Gamma(t))."""

    c: float
    mprime: float
    damping: DampingSpec
    direction_mode: str = "fixed"

    def __post_init__(self):
        if not self.c > 0:
            raise PerturbationError(f"c must be positive, got {self.c}")
        if not self.mprime > 0:
            raise PerturbationError(f"mprime must be positive, got {self.mprime}")


_MODES = ("fixed", "random")


@lru_cache(maxsize=4096)
def _random_unit(seed: int, piece: int, dim: int) -> tuple:
    u = np.random.default_rng([seed, piece]).standard_normal(dim)
    return tuple(u / np.linalg.norm(u))


@dataclass(frozen=True)
class PerturbationSchedule:
    """Forcing term g(t) with an exactly prescribed norm.

    In ``"random"`` direction mode the direction is a seeded unit vector that
    only changes at multiples of ``dir_interval``; it depends on
    ``(seed, floor(t / dir_interval))`` and nothing else.
    """

    variant: Zero | PowerLaw | ExpGamma
    dim: int
    seed: int = 0
    direction: tuple | None = None
    dir_interval: float = DEFAULT_DIR_INTERVAL
    t0: float = 1.0
    _unit: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mode = getattr(self.variant, "direction_mode", "fixed")
        if mode not in _MODES:
            raise PerturbationError(f"direction_mode must be one of {_MODES}, got {mode!r}")
        if not self.dir_interval > 0:
            raise PerturbationError("dir_interval must be positive")
        u = np.zeros(self.dim)
        if self.direction is None:
            u[0] = 1.0
        else:
            u = np.array(self.direction, dtype=float)
            if u.shape != (self.dim,) or not np.linalg.norm(u) > 0:
                raise PerturbationError(f"direction must be a nonzero vector of length {self.dim}")
            u = u / np.linalg.norm(u)
        u.setflags(write=False)
        object.__setattr__(self, "_unit", u)
        if isinstance(self.variant, ExpGamma):
            object.__setattr__(self, "t0", self.variant.damping.t0)

    @property
    def is_zero(self) -> bool:
        return isinstance(self.variant, Zero)

    @property
    def is_random(self) -> bool:
        return getattr(self.variant, "direction_mode", "fixed") == "random"

    def norm(self, t):
        """|g(t)|, vectorised over ``t``."""
        v = self.variant
        t = np.asarray(t, dtype=float)
        if isinstance(v, Zero):
            return np.zeros_like(t)
        if isinstance(v, PowerLaw):
            return v.c * t ** (-v.q)
        return v.c * np.exp(-v.mprime * gamma_integral(v.damping, t))

    def piece(self, t: float) -> int:
        # the small shift keeps t = k*dir_interval inside piece k despite rounding
        return int(math.floor(t / self.dir_interval + 1e-9))

    def next_switch(self, t: float) -> float:
        return (self.piece(t) + 1) * self.dir_interval

    def unit(self, piece: int | None = None) -> np.ndarray:
        if not self.is_random:
            return self._unit
        return np.array(_random_unit(self.seed, piece, self.dim))

    def units(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.is_random:
            return np.broadcast_to(self._unit, t.shape + (self.dim,))
        pieces = np.floor(t / self.dir_interval + 1e-9).astype(np.int64)
        out = np.empty(t.shape + (self.dim,))
        for k in np.unique(pieces):
            out[pieces == k] = _random_unit(self.seed, int(k), self.dim)
        return out

    def eval_many(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.norm(t)[..., None] * self.units(t)

    def to_config(self) -> dict:
        v = self.variant
        base = {"seed": self.seed}
        if self.direction is not None:
            base["direction"] = list(self.direction)
        if isinstance(v, Zero):
            return {"kind": "zero", **base}
        mode = {"direction": v.direction_mode}
        if v.direction_mode == "random":
            mode["dir_interval"] = self.dir_interval
        if isinstance(v, PowerLaw):
            return {"kind": "powerlaw", "c": v.c, "q": v.q, **mode, **base}
        return {"kind": "expgamma", "c": v.c, "mprime": v.mprime,
                "damping": v.damping.to_config(), **mode, **base}


def eval_g(schedule: PerturbationSchedule, t: float) -> np.ndarray:
    if t < schedule.t0:
        raise PerturbationError(f"g is defined on [t0, inf), got t={t} < t0={schedule.t0}")
    if schedule.is_zero:
        return np.zeros(schedule.dim)
    return float(schedule.norm(t)) * schedule.unit(schedule.piece(t) if schedule.is_random else None)


def schedule_from_config(spec: dict, dim: int, damping: DampingSpec | None = None) -> PerturbationSchedule:
    """Parse e.g. ``{"kind": "powerlaw", "c": 0.05, "q": 3.5, "direction": "fixed", "seed": 7}``.

    ``direction`` may be ``"fixed"`` (unit vector along the first axis, or
    ``"unit"`` if given), ``"random"``, or an explicit vector.
    """
    kind = spec.get("kind", "zero")
    seed = int(spec.get("seed", 0))
    t0 = damping.t0 if damping is not None else 1.0
    direction = spec.get("direction", "fixed")
    unit = spec.get("unit")
    if not isinstance(direction, str):
        unit, direction = direction, "fixed"
    mode = "random" if direction == "random" else "fixed"
    if direction not in ("fixed", "random"):
        raise PerturbationError(f"unknown direction {direction!r}")
    if kind == "zero":
        variant = Zero()
    elif kind == "powerlaw":
        variant = PowerLaw(float(spec["c"]), float(spec["q"]), mode)
    elif kind == "expgamma":
        dspec = spec.get("damping")
        if dspec is not None:
            dmp = DampingSpec(float(dspec["alpha"]), float(dspec["theta"]), float(dspec.get("t0", t0)))
        elif damping is not None:
            dmp = damping
        else:
            raise PerturbationError("expgamma schedule needs a damping spec")
        variant = ExpGamma(float(spec["c"]), float(spec["mprime"]), dmp, mode)
    else:
        raise PerturbationError(f"unknown schedule kind {kind!r}")
    return PerturbationSchedule(
        variant, dim, seed,
        direction=tuple(unit) if unit is not None else None,
        dir_interval=float(spec.get("dir_interval", DEFAULT_DIR_INTERVAL)),
        t0=t0,
    )


# -- integrability -------------------------------------------------------------

@dataclass(frozen=True)
class PolyWeight:
    """w(t) = t**p."""

    p: float


@dataclass(frozen=True)
class ExpWeight:
    """w(t) = exp(m * Gamma(t))."""

    m: float
    damping: DampingSpec

    def __post_init__(self):
        if not self.m > 0:
            raise PerturbationError(f"m must be positive, got {self.m}")


@dataclass(frozen=True)
class NoWeight:
    """Placeholder for theorems stated for g = 0 only."""


@dataclass(frozen=True)
class Integrability:
    finite: bool
    margin: float


def _decide(margin: float) -> Integrability:
    # borderline (margin 0) counts as divergent: every hypothesis is strict
    return Integrability(margin > 0, margin)


def integrability_margin(schedule: PerturbationSchedule, weight) -> Integrability:
    """Decide whether int_{t0}^inf w(t) |g(t)| dt is finite, in closed form.

    The margin is the distance to the borderline case in the natural exponent
    of the pair (power of t, or rate in Gamma units); +-inf when the two
    decay scales are of different kinds.
    """
    v = schedule.variant
    if isinstance(weight, NoWeight):
        return Integrability(schedule.is_zero, math.inf if schedule.is_zero else -math.inf)
    if isinstance(v, Zero):
        return Integrability(True, math.inf)
    if isinstance(weight, ExpWeight) and weight.damping.theta == 1:
        # exp(m*alpha*log(t/t0)) is a power law
        weight = PolyWeight(weight.m * weight.damping.alpha)
    if isinstance(v, ExpGamma) and v.damping.theta == 1:
        v = PowerLaw(v.c, v.mprime * v.damping.alpha)

    if isinstance(weight, PolyWeight):
        if isinstance(v, PowerLaw):
            return _decide(v.q - weight.p - 1)
        return Integrability(True, math.inf)

    # exponential weight with theta < 1
    if isinstance(v, PowerLaw):
        return Integrability(False, -math.inf)
    wd, gd = weight.damping, v.damping
    if gd.theta < wd.theta:
        return Integrability(True, math.inf)
    if gd.theta > wd.theta:
        return Integrability(False, -math.inf)
    # same power of t in both exponents: compare rates, in the weight's Gamma units
    return _decide(v.mprime * gd.alpha / wd.alpha - weight.m)


def required_weight(theorem_id: str, damping: DampingSpec, geometry, m: float | None = None):
    """Integrability weight the perturbation must satisfy for a theorem."""
    from .theorems import ensure_hypotheses, t3_default_m

    ensure_hypotheses(theorem_id, damping, geometry, m)
    g1, g2 = geometry.gamma1, geometry.gamma2
    r = (1 + damping.theta) / 2
    if theorem_id in ("T1", "T2"):
        return PolyWeight(g1 * damping.alpha / (g1 + 2))
    if theorem_id == "T3":
        return ExpWeight(t3_default_m(g1) if m is None else m, damping)
    if theorem_id == "T4":
        return NoWeight()
    if theorem_id == "T5":
        return PolyWeight(r * g2 / (g2 - 2))
    if theorem_id == "C1":
        return PolyWeight(r * g1 / (g1 - 2))
    raise PerturbationError(f"unknown theorem id {theorem_id!r}")
