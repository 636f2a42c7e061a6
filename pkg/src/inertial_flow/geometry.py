"""Convex test objectives with known flatness/sharpness exponents.

An objective carries a :class:`GeometryClass` describing the local growth
around its unique minimizer:

* flatness ``gamma1``:  F(x) - F* <= <grad F(x), x - x*> / gamma1
* sharpness ``gamma2``: K2 * |x - x*|**gamma2 <= F(x) - F*

Both are only claimed on the ball ``B(x*, radius)``.  The claims are checked
by seeded sampling (:func:`check_H1`, :func:`check_H2`), never symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

TOL_GEOM = 1e-9


class GeometryError(ValueError):
    """Raised for inconsistent geometry declarations or objective parameters."""


@dataclass(frozen=True)
class GeometryClass:
    gamma1: float
    gamma2: float
    K2: float
    radius: float = 1.0

    def __post_init__(self):
        if not self.gamma1 >= 1:
            raise GeometryError(f"gamma1 must be >= 1, got {self.gamma1}")
        # a convex function cannot be flatter than it is sharp
        if not self.gamma2 >= self.gamma1:
            raise GeometryError(
                f"geometry violates r >= gamma: gamma2={self.gamma2} < gamma1={self.gamma1}"
            )
        if not self.K2 > 0:
            raise GeometryError(f"K2 must be positive, got {self.K2}")
        if not self.radius > 0:
            raise GeometryError(f"radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Objective:
    """A convex objective with analytic gradient and declared geometry.

    ``eval`` and ``grad`` accept a single point of shape ``(dim,)`` or a batch
    of shape ``(..., dim)``.
    """

    kind: str
    params: dict
    dim: int
    minimizer: np.ndarray
    optimal_value: float
    geometry: GeometryClass
    gradient_lipschitz_on_bounded: bool
    _f: Callable = field(repr=False, compare=False)
    _grad: Callable = field(repr=False, compare=False)
    # gradient at a single float64 point, without input conversion (solver hot path)
    _grad_point: Callable | None = field(default=None, repr=False, compare=False)

    def eval(self, x) -> np.ndarray | float:
        return self._f(np.asarray(x, dtype=float))

    def grad(self, x) -> np.ndarray:
        return self._grad(np.asarray(x, dtype=float))

    def gap(self, x):
        """F(x) - F*."""
        return self.eval(x) - self.optimal_value

    def to_config(self) -> dict:
        return {"kind": self.kind, **self.params}


def _as_minimizer(minimizer, dim=None) -> np.ndarray:
    xs = np.array(minimizer, dtype=float).reshape(-1)
    if dim is not None and xs.size != dim:
        raise GeometryError(f"minimizer has {xs.size} entries, expected dim={dim}")
    xs.setflags(write=False)
    return xs


def make_power_objective(gamma: float, minimizer, scale: float = 1.0, radius: float = 1.0) -> Objective:
    """F(x) = scale * |x - x*|**gamma, which sits in H1(gamma) and H2(gamma) with K2 = scale."""
    gamma = float(gamma)
    scale = float(scale)
    if not gamma >= 2:
        # grad |x|**gamma is not Lipschitz at the minimizer below 2
        raise GeometryError(f"power objective needs gamma >= 2, got {gamma}")
    if not scale > 0:
        raise GeometryError(f"scale must be positive, got {scale}")
    xs = _as_minimizer(minimizer)

    def f(x):
        d = x - xs
        sq = np.einsum("...i,...i->...", d, d)
        if gamma == 2.0:
            return scale * sq
        return scale * sq ** (gamma / 2)

    def grad(x):
        d = x - xs
        if gamma == 2.0:
            return 2.0 * scale * d
        sq = np.einsum("...i,...i->...", d, d)
        return (gamma * scale * sq ** ((gamma - 2) / 2))[..., None] * d

    if gamma == 2.0:
        def grad_point(x):
            return (2.0 * scale) * (x - xs)
    else:
        half = (gamma - 2) / 2

        def grad_point(x):
            d = x - xs
            return (gamma * scale * float(d @ d) ** half) * d

    return Objective(
        kind="power",
        params={"gamma": gamma, "dim": int(xs.size), "scale": scale, "minimizer": xs.tolist()},
        dim=int(xs.size),
        minimizer=xs,
        optimal_value=0.0,
        geometry=GeometryClass(gamma, gamma, scale, radius),
        gradient_lipschitz_on_bounded=True,
        _f=f,
        _grad=grad,
        _grad_point=grad_point,
    )


def _ball_samples(center: np.ndarray, radius: float, n: int, rng: np.random.Generator,
                  inner: float = 0.0) -> np.ndarray:
    """Uniform samples in the ball (or the shell inner*radius <= |d| < radius)."""
    dim = center.size
    u = rng.standard_normal((n, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    lo = inner**dim
    rho = radius * (lo + (1 - lo) * rng.random(n)) ** (1.0 / dim)
    return center + rho[:, None] * u


def _anisotropic_K2(f, xs, gamma2, radius) -> float:
    # deterministic sample set: coordinate axes, diagonals and a fixed-seed cloud
    rng = np.random.default_rng(20190507)
    dim = xs.size
    pts = [_ball_samples(xs, radius, 4096, rng, inner=1e-3)]
    scales = radius * np.geomspace(1e-3, 1.0, 32, endpoint=False)
    for e in np.eye(dim):
        pts.append(xs + scales[:, None] * e)
    diag = np.ones(dim) / np.sqrt(dim)
    pts.append(xs + scales[:, None] * diag)
    pts = np.vstack(pts)
    d = np.linalg.norm(pts - xs, axis=1)
    ratio = f(pts) / d**gamma2
    return 0.5 * float(ratio.min())


def make_anisotropic_objective(exponents, minimizer, radius: float = 1.0) -> Objective:
    """Separable F(x) = sum_i |x_i - x*_i|**exponents[i].

    The slowest-growing coordinate sets the sharpness exponent (max exponent)
    while the steepest one sets the flatness exponent (min exponent).
    """
    gammas = np.array(exponents, dtype=float).reshape(-1)
    if gammas.size == 0 or np.any(~(gammas >= 2)):
        raise GeometryError(f"all exponents must be >= 2, got {gammas.tolist()}")
    xs = _as_minimizer(minimizer, gammas.size)

    def f(x):
        return np.sum(np.abs(x - xs) ** gammas, axis=-1)

    def grad(x):
        d = x - xs
        return gammas * np.abs(d) ** (gammas - 1) * np.sign(d)

    g2 = float(gammas.max())
    K2 = _anisotropic_K2(f, xs, g2, radius)
    return Objective(
        kind="anisotropic",
        params={"exponents": gammas.tolist(), "minimizer": xs.tolist()},
        dim=int(xs.size),
        minimizer=xs,
        optimal_value=0.0,
        geometry=GeometryClass(float(gammas.min()), g2, K2, radius),
        gradient_lipschitz_on_bounded=True,
        _f=f,
        _grad=grad,
    )


OBJECTIVES = {
    "power": lambda p: make_power_objective(
        p["gamma"],
        p.get("minimizer", [0.0] * int(p.get("dim", 1))),
        p.get("scale", 1.0),
        p.get("radius", 1.0),
    ),
    "anisotropic": lambda p: make_anisotropic_objective(
        p["exponents"],
        p.get("minimizer", [0.0] * len(p["exponents"])),
        p.get("radius", 1.0),
    ),
}


def objective_from_config(spec: dict) -> Objective:
    """Build an objective from e.g. ``{"kind": "power", "gamma": 4.0, "dim": 2}``."""
    kind = spec.get("kind")
    if kind not in OBJECTIVES:
        raise GeometryError(f"unknown objective kind {kind!r}; known: {sorted(OBJECTIVES)}")
    obj = OBJECTIVES[kind](spec)
    if "dim" in spec and int(spec["dim"]) != obj.dim:
        raise GeometryError(f"dim={spec['dim']} does not match minimizer of length {obj.dim}")
    if "geometry" in spec:
        # a declared (possibly weaker) claim; it is validated here and checked by sampling later
        g = spec["geometry"]
        geom = GeometryClass(float(g["gamma1"]), float(g["gamma2"]), float(g.get("K2", obj.geometry.K2)),
                             float(g.get("radius", obj.geometry.radius)))
        obj = replace(obj, geometry=geom, params={**obj.params, "geometry": g})
    return obj


@dataclass(frozen=True)
class GeometryReport:
    passed: bool
    worst_violation: float
    n_samples: int

    def __bool__(self):
        return self.passed


def sample_ball(objective: Objective, n_samples: int, seed: int, inner: float = 0.0) -> np.ndarray:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    return _ball_samples(objective.minimizer, objective.geometry.radius, n_samples, rng, inner)


def h1_violations(objective: Objective, gamma: float, x: np.ndarray) -> np.ndarray:
    """F(x) - F* - <grad F(x), x - x*>/gamma at each row of ``x``."""
    d = x - objective.minimizer
    inner = np.einsum("ij,ij->i", objective.grad(x), d)
    return objective.gap(x) - inner / gamma


def check_H1(objective: Objective, gamma: float, n_samples: int = 2000, seed: int = 0,
             tol: float = TOL_GEOM) -> GeometryReport:
    x = sample_ball(objective, n_samples, seed)
    worst = float(h1_violations(objective, gamma, x).max())
    return GeometryReport(worst <= tol, worst, n_samples)


def check_H2(objective: Objective, r: float, K: float, n_samples: int = 2000, seed: int = 0,
             tol: float = TOL_GEOM) -> GeometryReport:
    x = sample_ball(objective, n_samples, seed)
    dist = np.linalg.norm(x - objective.minimizer, axis=1)
    worst = float((K * dist**r - objective.gap(x)).max())
    return GeometryReport(worst <= tol, worst, n_samples)


@dataclass(frozen=True)
class GradientCheck:
    max_rel_error: float
    n_samples: int


def finite_difference_gradient_check(objective: Objective, n_samples: int = 200, seed: int = 0,
                                     h: float = 1e-5) -> GradientCheck:
    """Compare the analytic gradient with central differences.

    Samples are drawn in the shell ``0.05*radius <= |x - x*| < radius`` to stay
    away from the minimizer, where the higher derivatives of non-quadratic
    members degenerate.  The error of each coordinate is measured relative to
    the gradient's max-norm at that sample.
    """
    if not 0 < h <= 1e-3:
        raise ValueError(f"h must lie in (0, 1e-3], got {h}")
    x = sample_ball(objective, n_samples, seed, inner=0.05)
    g = objective.grad(x)
    fd = np.empty_like(g)
    for i in range(objective.dim):
        e = np.zeros(objective.dim)
        e[i] = h
        fd[:, i] = (objective.eval(x + e) - objective.eval(x - e)) / (2 * h)
    scale = np.maximum(np.abs(g).max(axis=1, keepdims=True), np.finfo(float).tiny)
    return GradientCheck(float((np.abs(fd - g) / scale).max()), n_samples)
