"""Command-line entry point: ``inertial-flow {run,batch,accept,presets}``.

Exit codes: 0 when everything passes, 1 when any verdict fails, 2 on usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .presets import all_presets, preset_dict, preset_names
from .runner import ExperimentReport, run_batch, run_experiment

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _summary(rep: ExperimentReport) -> str:
    if rep.status != "ok":
        return f"[ERROR] {rep.name}: {rep.error}"
    verdicts = ", ".join(f"{tid} {t.get('verdict') or 'n/a'}" for tid, t in rep.theorems.items())
    lemmas = ", ".join(f"{lm['lemma_id']} {'ok' if lm['passed'] else 'FAIL'}" for lm in rep.lemmas)
    parts = [p for p in (verdicts, lemmas) if p]
    return f"[{'PASS' if rep.passed else 'FAIL'}] {rep.name}: {'; '.join(parts)} ({rep.duration_s:.1f}s)"


def _load(path) -> object:
    try:
        return load_config(path)
    except ValueError as exc:  # ConfigError and geometry/perturbation validation errors
        raise ConfigError(str(exc)) from None


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    rep = run_experiment(cfg, write=True, figures=args.figures)
    print(_summary(rep))
    if rep.outputs.get("report"):
        print(f"  report: {rep.outputs['report']}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_batch(args) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        raise ConfigError(f"not a directory: {root}")
    configs = [_load(p) for p in sorted(root.glob("*.json"))]
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    reports = run_batch(configs, parallelism=args.jobs, write=True, figures=args.figures)
    for rep in reports:
        print(_summary(rep))
    print(f"{sum(r.passed for r in reports)}/{len(reports)} experiments passed")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _cmd_accept(args) -> int:
    from .acceptance import AcceptanceSuite

    suite = AcceptanceSuite()
    numbers = None
    if args.only:
        try:
            numbers = sorted({int(x) for x in args.only.split(",")})
        except ValueError:
            raise ConfigError(f"--only expects comma-separated criterion numbers, got {args.only!r}") from None
        bad = [n for n in numbers if n not in suite.TITLES]
        if bad:
            raise ConfigError(f"unknown criteria {bad}")
    results = []
    for n in numbers or sorted(suite.TITLES):
        res = suite.run(n)
        results.append(res)
        print(res.line(), flush=True)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _cmd_presets(args) -> int:
    if args.dump:
        out = Path(args.dump)
        out.mkdir(parents=True, exist_ok=True)
        for name in preset_names():
            (out / f"{name}.json").write_text(json.dumps(preset_dict(name), indent=2))
        print(f"wrote {len(preset_names())} configs to {out}")
        return EXIT_OK
    for cfg in all_presets():
        print(f"{cfg.name:36s} {','.join(cfg.theorems):14s} {cfg.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inertial-flow",
                                     description="Simulate perturbed inertial gradient flows and check their rates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config", help="path to an experiment JSON file")
    p.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("batch", help="run every *.json config in a directory")
    p.add_argument("directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    p.set_defaults(func=_cmd_batch)

    p = sub.add_parser("accept", help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers, e.g. 1,3,7")
    p.set_defaults(func=_cmd_accept)

    p = sub.add_parser("presets", help="list the shipped experiment configs")
    p.add_argument("--dump", metavar="DIR", help="write each preset as a JSON config into DIR")
    p.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already wrote usage to stderr
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"inertial-flow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
