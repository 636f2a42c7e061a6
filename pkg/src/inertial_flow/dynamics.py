"""Integration of  x'' + (alpha/t**theta) x' + grad F(x) = g(t)  from t0 to T.

The second-order equation is solved as the first-order system
``x' = v, v' = g(t) - beta(t) v - grad F(x)`` with the Dormand-Prince 5(4)
embedded pair.  Output samples are produced by the pair's continuous
extension (a quartic per step), so the sampling grid never influences the
step sequence.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import Objective
from .perturbation import DampingSpec, ExpGamma, PerturbationSchedule, PowerLaw, gamma_integral

# Dormand & Prince (1980); continuous extension of Shampine (1986).
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])
# zero-padded to 7 columns so a stage combination is one matvec over all of K
_A_ROWS = [np.array(r + (0.0,) * (7 - len(r))) for r in _A]

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_MAX_NONFINITE = 30


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.17g}")
        self.t = t


class StepSizeUnderflow(IntegrationError):
    pass


class DivergenceError(IntegrationError):
    pass


@dataclass(frozen=True)
class LogUniformGrid:
    points_per_decade: int = 100

    def __post_init__(self):
        if self.points_per_decade < 4:
            raise ValueError("points_per_decade must be >= 4")

    def times(self, t0: float, T: float) -> np.ndarray:
        n = int(math.floor(self.points_per_decade * math.log10(T / t0) + 1e-9))
        t = t0 * 10.0 ** (np.arange(n + 1) / self.points_per_decade)
        return _close_grid(t, T)

    def to_config(self) -> dict:
        return {"kind": "log", "points_per_decade": self.points_per_decade}


@dataclass(frozen=True)
class UniformGrid:
    dt: float = 0.01

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def times(self, t0: float, T: float) -> np.ndarray:
        n = int(math.floor((T - t0) / self.dt + 1e-9))
        return _close_grid(t0 + self.dt * np.arange(n + 1), T)

    def to_config(self) -> dict:
        return {"kind": "uniform", "dt": self.dt}


def _close_grid(t: np.ndarray, T: float) -> np.ndarray:
    t = t[t < T]
    if t.size and T - t[-1] < 1e-12 * T:
        t = t[:-1]
    return np.append(t, T)


def grid_from_config(spec: dict):
    kind = spec.get("kind", "log")
    if kind in ("log", "log-uniform"):
        return LogUniformGrid(int(spec.get("points_per_decade", 100)))
    if kind == "uniform":
        return UniformGrid(float(spec["dt"]))
    raise ValueError(f"unknown sample grid kind {kind!r}")


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-15
    max_step: float = math.inf
    sample_grid: LogUniformGrid | UniformGrid = field(default_factory=LogUniformGrid)
    max_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            val = getattr(self, name)
            if not 0 < val <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {val}")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")

    def to_config(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_step": None if math.isinf(self.max_step) else self.max_step,
            "grid": self.sample_grid.to_config(),
        }

    @classmethod
    def from_config(cls, spec: dict) -> "SolverConfig":
        kw = {}
        for name in ("rel_tol", "abs_tol", "max_step"):
            if spec.get(name) is not None:
                kw[name] = float(spec[name])
        if "grid" in spec:
            kw["sample_grid"] = grid_from_config(spec["grid"])
        return cls(**kw)


@dataclass(frozen=True)
class State:
    t: float
    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class SolverStats:
    steps_accepted: int
    steps_rejected: int
    max_step: float
    min_step: float
    rhs_evals: int


@dataclass(frozen=True)
class DenseSolution:
    """Piecewise quartic continuous extension over all accepted steps."""

    t_start: np.ndarray
    h: np.ndarray
    y_start: np.ndarray
    Q: np.ndarray  # (steps, 2n, 4)

    def __call__(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        i = np.searchsorted(self.t_start, times, side="right") - 1
        i = np.clip(i, 0, self.t_start.size - 1)
        h = self.h[i]
        th = (times - self.t_start[i]) / h
        powers = np.stack([th, th**2, th**3, th**4], axis=-1)
        return self.y_start[i] + h[:, None] * np.einsum("skj,sj->sk", self.Q[i], powers)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    objective: Objective
    damping: DampingSpec
    schedule: PerturbationSchedule
    stats: SolverStats
    dense: DenseSolution | None = field(default=None, repr=False, compare=False)

    def __len__(self):
        return self.t.size

    def __getitem__(self, i) -> State:
        return State(float(self.t[i]), self.x[i], self.v[i])

    def states(self):
        return (self[i] for i in range(len(self)))

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def gap(self) -> np.ndarray:
        return self.objective.gap(self.x)

    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=1)

    def resample(self, grid) -> "Trajectory":
        """Re-sample the stored continuous extension; no re-integration."""
        if self.dense is None:
            raise ValueError("trajectory was integrated without keep_dense")
        times = grid.times(float(self.t[0]), self.T) if hasattr(grid, "times") else np.asarray(grid, float)
        y = self.dense(times)
        n = self.objective.dim
        # keep stored endpoint samples exact
        if times[0] == self.t[0]:
            y[0] = np.concatenate([self.x[0], self.v[0]])
        if times[-1] == self.T:
            y[-1] = np.concatenate([self.x[-1], self.v[-1]])
        return replace(self, t=times, x=y[:, :n], v=y[:, n:])

    def to_csv(self, path) -> Path:
        """Columns t, x_0..x_{n-1}, v_0..v_{n-1}, F_gap with 17 significant digits."""
        path = Path(path)
        n = self.objective.dim
        header = ["t"] + [f"x_{i}" for i in range(n)] + [f"v_{i}" for i in range(n)] + ["F_gap"]
        data = np.column_stack([self.t, self.x, self.v, self.gap()])
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in data:
                w.writerow([f"{val:.17g}" for val in row])
        return path


def mechanical_energy(objective: Objective, state) -> float | np.ndarray:
    """F(x) - F* + |v|^2 / 2 for a :class:`State` or a :class:`Trajectory`."""
    v = np.asarray(state.v)
    return objective.gap(state.x) + 0.5 * np.sum(v * v, axis=-1)


def _make_rhs(objective: Objective, damping: DampingSpec, schedule: PerturbationSchedule, n: int):
    grad = objective._grad_point or objective._grad
    alpha, theta = damping.alpha, damping.theta
    var = schedule.variant
    # replaced per step in random-direction mode
    unit = [schedule.unit(schedule.piece(damping.t0) if schedule.is_random else None)]

    if isinstance(var, PowerLaw):
        c, q = var.c, var.q

        def gnorm(t):
            return c * t**-q
    elif isinstance(var, ExpGamma):
        c, mp, dmp = var.c, var.mprime, var.damping

        def gnorm(t):
            return c * math.exp(-mp * gamma_integral(dmp, t))
    else:
        gnorm = None

    def rhs(t, y):
        out = np.empty(2 * n)
        v = y[n:]
        out[:n] = v
        acc = out[n:]
        if theta == 0:
            np.multiply(v, -alpha, out=acc)
        elif theta == 1:
            np.multiply(v, -alpha / t, out=acc)
        else:
            np.multiply(v, -alpha * t ** (-theta), out=acc)
        acc -= grad(y[:n])
        if gnorm is not None:
            acc += gnorm(t) * unit[0]
        return out

    return rhs, unit


def _rms(a: np.ndarray) -> float:
    return math.sqrt(float(np.dot(a, a)) / a.size)


def integrate(objective: Objective, damping: DampingSpec, schedule: PerturbationSchedule,
              x0, v0, T: float, config: SolverConfig | None = None,
              keep_dense: bool = True) -> Trajectory:
    """Integrate from ``(x0, v0)`` at ``damping.t0`` to ``T`` and sample on the configured grid."""
    config = config or SolverConfig()
    t0 = damping.t0
    n = objective.dim
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    v0 = np.asarray(v0, dtype=float).reshape(-1)
    if x0.size != n or v0.size != n:
        raise ValueError(f"x0/v0 must have dim {n}, got {x0.size}/{v0.size}")
    if schedule.dim != n:
        raise ValueError(f"schedule dim {schedule.dim} does not match objective dim {n}")
    if not T > t0:
        raise ValueError(f"T must exceed t0={t0}, got {T}")

    rtol, atol = config.rel_tol, config.abs_tol
    hmax = config.max_step
    if schedule.is_random:
        hmax = min(hmax, schedule.dir_interval)
    rhs, unit = _make_rhs(objective, damping, schedule, n)
    random_dir = schedule.is_random

    grid = config.sample_grid.times(t0, T)
    out = np.empty((grid.size, 2 * n))
    out[0] = np.concatenate([x0, v0])
    gi = 1

    t = t0
    y = out[0].copy()
    switch = math.inf
    if random_dir:
        unit[0] = schedule.unit(schedule.piece(t))
        switch = schedule.next_switch(t)
    K = np.zeros((7, 2 * n))
    K[0] = rhs(t, y)
    nfev = 1

    # initial step (Hairer, Norsett & Wanner, II.4)
    ay = np.abs(y)
    sc = atol + rtol * ay
    d0, d1 = _rms(y / sc), _rms(K[0] / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, hmax, T - t)
    f1 = rhs(t + h0, y + h0 * K[0])
    nfev += 1
    d2 = _rms((f1 - K[0]) / sc) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    h = min(100 * h0, h1)

    ts, hs, ys, Qs = [], [], [], []
    accepted = rejected = nonfinite = 0
    hmin_acc, hmax_acc = math.inf, 0.0
    eps = np.finfo(float).eps

    while t < T:
        if accepted + rejected >= config.max_steps:
            raise IntegrationError("maximum number of steps exceeded", t)
        h = min(h, hmax, T - t)
        clipped = random_dir and t + h >= switch - 64 * eps * switch
        if clipped:
            h = switch - t
        if h < 16 * eps * max(abs(t), 1.0):
            raise StepSizeUnderflow(f"step size underflow (h={h:.3g})", t)
        for i in range(1, 6):
            K[i] = rhs(t + _C[i] * h, y + h * (_A_ROWS[i] @ K))
        y_new = y + h * (_B @ K)
        K[6] = rhs(t + h, y_new)
        nfev += 6
        err = h * (_E @ K)
        ay_new = np.abs(y_new)
        sc = atol + rtol * np.maximum(ay, ay_new)
        en = _rms(err / sc)

        # an overflowing state shows up as a nan/inf error norm
        if not math.isfinite(en):
            nonfinite += 1
            rejected += 1
            if nonfinite > _MAX_NONFINITE:
                raise DivergenceError("non-finite state", t)
            K[1:] = 0.0  # stale inf/nan would leak through the zero padding
            h *= _FAC_MIN
            continue
        nonfinite = 0

        if en > 1.0:
            rejected += 1
            h *= max(_FAC_MIN, _SAFETY * en ** -0.2)
            continue

        t_new = T if T - (t + h) <= 4 * eps * T else t + h
        if clipped:
            t_new = min(switch, T)  # land exactly on the switch so no sliver step follows
        Q = K.T @ _P if keep_dense or (gi < grid.size and grid[gi] <= t_new) else None
        if keep_dense:
            ts.append(t)
            hs.append(h)
            ys.append(y)
            Qs.append(Q)
        # dense output for the grid points covered by this step
        if gi < grid.size and grid[gi] <= t_new:
            gj = gi
            while gj < grid.size and grid[gj] <= t_new:
                gj += 1
            th = (grid[gi:gj] - t) / h
            out[gi:gj] = y + h * (np.stack([th, th**2, th**3, th**4], axis=1) @ Q.T)
            if gj == grid.size and t_new == T:
                out[-1] = y_new
            gi = gj

        accepted += 1
        hmin_acc = min(hmin_acc, h)
        hmax_acc = max(hmax_acc, h)
        if ay_new.max() > 1e150:
            raise DivergenceError("state magnitude exceeds 1e150", t_new)
        t = t_new
        y = y_new
        ay = ay_new
        K[0] = K[6]
        fac = _FAC_MAX if en == 0 else min(_FAC_MAX, max(_FAC_MIN, _SAFETY * en ** -0.2))
        h *= fac
        if random_dir and t >= switch:
            unit[0] = schedule.unit(schedule.piece(switch))
            switch = schedule.next_switch(switch)
            K[0] = rhs(t, y)
            nfev += 1

    dense = None
    if keep_dense:
        dense = DenseSolution(np.array(ts), np.array(hs), np.array(ys), np.array(Qs))
    stats = SolverStats(accepted, rejected, hmax_acc, hmin_acc, nfev)
    return Trajectory(grid, out[:, :n].copy(), out[:, n:].copy(), objective, damping, schedule, stats, dense)
