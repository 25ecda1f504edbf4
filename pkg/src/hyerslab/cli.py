"""Batch command-line interface.

Exit codes: 0 success, 1 assertion / convergence failure or axiom
violation, 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .algebra import algebra_from_spec, bimodule_from_spec, validate, Violation, ViolationReport
from .config import ConfigError, load_config, resolve_path
from .errors import DimensionMismatch, HyersLabError, MissingUnit, NoConvergence, RankUncertain
from .hyers import hyers_limit
from .linmap import make_perturbed
from .oracle import KINDS, solve
from .serialize import dumps, write_history_csv, write_json
from .verify import _setup, run_experiment

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _emit(obj, out=None):
    if out:
        write_json(out, obj)
    sys.stdout.write(dumps(obj))


def _read_json(path, kind):
    with open(resolve_path(path, kind)) as fh:
        return json.load(fh)


def _threads():
    try:
        return max(1, int(os.environ.get("HYERSLAB_THREADS", "1")))
    except ValueError:
        return 1


def cmd_validate(args):
    try:
        spec = _read_json(args.path, "algebras")
        if "algebra" in spec and "left" in spec:
            alg = algebra_from_spec(spec["algebra"])
            obj = bimodule_from_spec(alg, spec)
        else:
            obj = algebra_from_spec(spec)
    except MissingUnit as exc:
        report = ViolationReport([Violation("unit", float("inf"), ())])
        _emit({**report.to_dict(), "message": str(exc)})
        return EXIT_FAIL
    except (OSError, ValueError, KeyError, TypeError, DimensionMismatch) as exc:
        print(f"hyerslab validate: cannot parse {args.path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = validate(obj)
    _emit(report.to_dict())
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_solve(args):
    try:
        spec = _read_json(args.path, "algebras")
        alg = algebra_from_spec(spec)
    except (OSError, ValueError, KeyError, TypeError, DimensionMismatch, MissingUnit) as exc:
        print(f"hyerslab solve: cannot parse {args.path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = validate(alg)
    if not report.ok:
        _emit(report.to_dict())
        return EXIT_FAIL
    try:
        space = solve(alg, None, args.kind)
    except RankUncertain as exc:
        _emit({"error": "RankUncertain", "message": str(exc), "spectrum": exc.spectrum})
        return EXIT_FAIL
    _emit(space.to_dict(), args.out)
    return EXIT_OK


def _load(args, **overrides):
    cfg = load_config(args.config)
    return cfg.with_overrides(**overrides)


def cmd_hyers(args):
    try:
        cfg = _load(args, seed=args.seed, direction=args.direction, tol=args.tol)
    except (OSError, ValueError, ConfigError) as exc:
        print(f"hyerslab hyers: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        A, X, _, d0, delta0 = _setup(cfg)
    except HyersLabError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_FAIL
    base, model = (d0, cfg.perturbation_f) if args.map == "f" else (delta0, cfg.perturbation_g)
    f = make_perturbed(base, model, A, X)
    direction = cfg.resolved_direction()
    n_max = args.n_max or cfg.n_max
    status = EXIT_OK
    try:
        res = hyers_limit(f, direction, n_max, cfg.tolerances["iteration"], seed=cfg.seed)
        error = None
    except NoConvergence as exc:
        res, error, status = exc.result, {"error": "NoConvergence", "message": str(exc)}, EXIT_FAIL
    except HyersLabError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return EXIT_FAIL
    out = {
        "experiment": cfg.id,
        "map": args.map,
        "direction": direction,
        "converged": res.converged,
        "iterations_used": res.iterations_used,
        "decay_slope": res.decay_slope(),
        "linearized": res.linearized,
        "error": error,
        "limit": [[[float(z.real), float(z.imag)] for z in row] for row in res.limit.matrix],
    }
    if args.out:
        write_history_csv(args.out, res.history_rows())
    _emit(out)
    return status


def _write_report(report, out_dir):
    out_dir = Path(out_dir)
    write_json(out_dir / f"{report.id}.json", report.to_dict())
    for tag in sorted({row[0] for row in report.histories}):
        rows = [row[1:] for row in report.histories if row[0] == tag]
        write_history_csv(out_dir / f"{report.id}_{tag}_history.csv", rows)


def cmd_experiment(args):
    try:
        cfgs = [
            load_config(p).with_overrides(seed=args.seed, samples=args.samples, direction=args.direction, tol=args.tol)
            for p in args.config
        ]
    except (OSError, ValueError, ConfigError) as exc:
        print(f"hyerslab experiment: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with ThreadPoolExecutor(max_workers=min(_threads(), len(cfgs))) as pool:
        reports = list(pool.map(run_experiment, cfgs))
    if args.out:
        for r in reports:
            _write_report(r, args.out)
    if len(reports) == 1:
        _emit(reports[0].to_dict())
    else:
        _emit(merge_reports([r.to_dict() for r in reports]))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def merge_reports(reports):
    return {
        "passed": all(r.get("passed", False) for r in reports),
        "n_reports": len(reports),
        "summary": [
            {
                "experiment": r.get("experiment"),
                "passed": r.get("passed"),
                "failed_assertions": [a["name"] for a in r.get("assertions", []) if not a.get("passed")],
                "stage_error": r.get("stage_error"),
            }
            for r in reports
        ],
        "reports": reports,
    }


def cmd_report_merge(args):
    try:
        reports = []
        for p in args.reports:
            with open(p) as fh:
                reports.append(json.load(fh))
    except (OSError, ValueError) as exc:
        print(f"hyerslab report-merge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    merged = merge_reports(reports)
    _emit(merged, args.out)
    return EXIT_OK if merged["passed"] else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="hyerslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the axioms of an algebra spec file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="exact solution space of a derivation-type identity")
    p.add_argument("path")
    p.add_argument("--kind", choices=KINDS, default="jordan_derivation")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float, help="iteration tolerance")
        p.add_argument("--direction", choices=("ascending", "descending", "auto"))
        p.add_argument("--out")

    p = sub.add_parser("hyers", help="run the doubling iteration on one map of an experiment config")
    p.add_argument("config")
    p.add_argument("--map", choices=("f", "g"), default="f")
    p.add_argument("--n-max", type=int)
    common(p)
    p.set_defaults(func=cmd_hyers)

    p = sub.add_parser("experiment", help="run one or more experiment configs")
    p.add_argument("config", nargs="+")
    p.add_argument("--samples", type=int)
    common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report-merge", help="merge report JSON files into one summary")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report_merge)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
