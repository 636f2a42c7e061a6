"""Experiment pipeline: integrate, certify, fit, judge, write outputs."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, config_from_dict
from .dynamics import IntegrationError, Trajectory, integrate
from .geometry import check_H1, check_H2, finite_difference_gradient_check
from .lyapunov import (LyapunovError, certify_c_bound, certify_lemma_bound,
                       certify_xi_bound, eval_G_series, monotonicity_report, select_params)
from .perturbation import integrability_margin, required_weight
from .rates import ExpRate, PolyRate, RateError, dispatch, fit_rate, fit_velocity_rate, verdict
from .theorems import violated

GRADIENT_TOL = 1e-6


@dataclass
class ExperimentReport:
    name: str
    status: str = "ok"  # "ok" or "error"
    passed: bool = False
    config: dict = field(default_factory=dict)
    geometry: dict = field(default_factory=dict)
    dispatch: list = field(default_factory=list)
    integrability: dict = field(default_factory=dict)
    theorems: dict = field(default_factory=dict)
    lemmas: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    monotonicity: dict | None = None
    solver_stats: dict | None = None
    outputs: dict = field(default_factory=dict)
    error: str | None = None
    duration_s: float = 0.0

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def comparable(self) -> dict:
        """Everything except the wall-clock duration."""
        d = self.to_dict()
        d.pop("duration_s")
        return d


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _geometry_checks(obj) -> dict:
    g = obj.geometry
    h1 = check_H1(obj, g.gamma1)
    h2 = check_H2(obj, g.gamma2, g.K2)
    fd = finite_difference_gradient_check(obj)
    return {
        "H1": {"gamma": g.gamma1, "passed": h1.passed, "worst_violation": h1.worst_violation},
        "H2": {"r": g.gamma2, "K": g.K2, "passed": h2.passed, "worst_violation": h2.worst_violation},
        "gradient": {"max_rel_error": fd.max_rel_error, "passed": fd.max_rel_error <= GRADIENT_TOL},
    }


def _fit_for(case, traj: Trajectory, cfg: ExperimentConfig):
    pred = case.prediction
    if isinstance(pred, PolyRate) and pred.quantity == "speed":
        return fit_velocity_rate(traj, cfg.windows.get("poly"), cfg.envelope)
    if isinstance(pred, PolyRate):
        return fit_rate(traj, "poly", cfg.windows.get("poly"), cfg.envelope)
    return fit_rate(traj, "exp-gamma", cfg.windows.get("exp-gamma"), cfg.envelope)


def _lyapunov_section(cfg: ExperimentConfig, traj, obj, damping, schedule, report):
    spec = cfg.lyapunov
    params = select_params(spec.variant, damping, obj.geometry)
    grid = cfg.certification_grid()
    fine = traj.resample(grid) if grid is not None else traj
    for lemma in spec.lemmas:
        rep = certify_lemma_bound(lemma, params, fine, obj, schedule)
        report.lemmas.append(rep.to_dict() | {"n_violations": len(rep.violating_times),
                                              "violating_times": rep.violating_times[:20]})
    if spec.c_bound:
        report.bounds.append(certify_c_bound(params, fine, obj).to_dict())
    if spec.xi_bound:
        report.bounds.append(certify_xi_bound(params, damping).to_dict())
    if spec.monotone:
        series = eval_G_series(params, fine, obj, schedule)
        mono = monotonicity_report(series, spec.t1_hint, spec.monotone)
        first = mono.first_monotone_time
        ok = first is not None and first <= fine.T / 10 and mono.n_violations_after == 0
        report.monotonicity = mono.to_dict() | {"passed": ok, "grid_size": len(fine)}
    # exported series lives on the trajectory's own grid
    return eval_G_series(params, traj, obj, schedule)


def run_experiment(config, write: bool = True, figures: bool = False) -> ExperimentReport:
    """Run one experiment; failures are recorded in the report, never raised."""
    start = time.perf_counter()
    if isinstance(config, ExperimentConfig):
        name = config.name
    else:
        name = str(config.get("name", "?")) if isinstance(config, dict) else "?"
    report = ExperimentReport(name)
    try:
        cfg = config if isinstance(config, ExperimentConfig) else config_from_dict(config)
        report.config = cfg.to_config()
        _run(cfg, report, write, figures)
    except (ConfigError, ValueError, IntegrationError, LyapunovError, RateError) as exc:
        report.status = "error"
        report.error = f"{type(exc).__name__}: {exc}"
    report.passed = report.status == "ok" and _all_pass(report)
    report.duration_s = time.perf_counter() - start
    if write and report.outputs.get("dir"):
        Path(report.outputs["report"]).write_text(report.to_json())
    return report


def _all_pass(report: ExperimentReport) -> bool:
    checks = [t.get("verdict") == "pass" for t in report.theorems.values()]
    checks += [lm["passed"] for lm in report.lemmas]
    checks += [b["passed"] for b in report.bounds]
    if report.monotonicity is not None:
        checks.append(report.monotonicity["passed"])
    checks += [g["passed"] for g in report.geometry.values()]
    return all(checks)


def _run(cfg: ExperimentConfig, report: ExperimentReport, write: bool, figures: bool) -> None:
    obj = cfg.build_objective()
    damping = cfg.build_damping()
    schedule = cfg.build_schedule(obj.dim, damping)
    solver = cfg.build_solver()

    report.geometry = _geometry_checks(obj)
    if not all(g["passed"] for g in report.geometry.values()):
        raise ValueError("declared geometry or gradient fails its sampled check")

    cases = dispatch(damping, obj.geometry, schedule, cfg.m)
    report.dispatch = [c.to_dict() for c in cases]
    by_id = {c.id: c for c in cases}
    unmet = {}
    for tid in cfg.theorems:
        bad = violated(tid, damping, obj.geometry, cfg.m)
        if bad:
            unmet[tid] = "hypotheses not met: " + "; ".join(bad)
            continue
        integ = integrability_margin(schedule, required_weight(tid, damping, obj.geometry, cfg.m))
        report.integrability[tid] = {"finite": integ.finite, "margin": integ.margin}
        if not integ.finite:
            unmet[tid] = f"hypotheses not met: perturbation not integrable (margin {integ.margin:g})"
    for tid, note in unmet.items():
        report.theorems[tid] = {"verdict": None, "note": note}
    if unmet and cfg.strict:
        raise ValueError("; ".join(f"{k}: {v}" for k, v in unmet.items()))

    traj = integrate(obj, damping, schedule, cfg.x0, cfg.v0, cfg.T, solver)
    report.solver_stats = asdict(traj.stats)

    for tid in cfg.theorems:
        if tid in unmet:
            continue
        case = by_id[tid]
        entry = {"prediction": case.to_dict()["prediction"]}
        if case.note:
            entry["note"] = case.note
        try:
            fit = _fit_for(case, traj, cfg)
            v = verdict(case, fit, cfg.slack.get(tid))
            entry.update(fit=fit.to_dict(v), verdict="pass" if v.passed else "fail", detail=v.detail)
        except RateError as exc:
            entry.update(verdict="fail", detail=f"fit failed: {exc}")
        report.theorems[tid] = entry

    series = None
    if cfg.lyapunov is not None:
        series = _lyapunov_section(cfg, traj, obj, damping, schedule, report)

    if write:
        out = cfg.resolved_output_dir()
        out.mkdir(parents=True, exist_ok=True)
        report.outputs = {"dir": str(out), "trajectory": str(traj.to_csv(out / "trajectory.csv")),
                          "report": str(out / "report.json")}
        if series is not None:
            report.outputs["energy"] = str(series.to_csv(out / "energy.csv"))
        if figures:
            from .figures import render_figures
            report.outputs["figures"] = [str(p) for p in render_figures(traj, series, out)]


def _run_one(args):
    config, write, figures = args
    return run_experiment(config, write, figures)


def run_batch(configs, parallelism: int = 1, write: bool = True, figures: bool = False) -> list[ExperimentReport]:
    """Reports in input order; each experiment is isolated in its own report."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    configs = list(configs)
    names = [c.name if isinstance(c, ExperimentConfig) else c.get("name") for c in configs]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ConfigError(f"experiment names must be unique within a batch: {sorted(dup)}")
    jobs = [(c, write, figures) for c in configs]
    if parallelism == 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_one, jobs))
