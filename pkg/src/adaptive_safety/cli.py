"""Command-line front end.

Exit codes::

    0  success; every invariant check passed
    1  the run finished but an invariant check failed
    2  config or trajectory could not be parsed
    3  config parsed but failed validation
    4  simulation aborted
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import checks, config
from .dynamics import Trajectory
from .errors import ConfigParseError, ConfigurationError, InfeasibleError, SimulationError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INVARIANT, EXIT_PARSE, EXIT_VALIDATION, EXIT_SIMULATION = range(5)


def _clean(value):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def build_report(spec, metrics, invariants, files, seed=None):
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "scenario": spec.scenario,
        "config_hash": spec.config_hash,
        "config": spec.canonical()["config"],
        "seed": seed,
        "metrics": metrics.as_dict(),
        "invariants": [r.as_dict() for r in invariants],
        "all_passed": all(r.passed for r in invariants),
        "files": files,
    })


def execute(spec, out_dir, seed=None):
    """Run ``spec``, write ``trajectory.csv`` and ``report.json``; returns the report."""
    traj, metrics = spec.run()
    invariants = checks.check(spec, traj)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "trajectory.csv")
    report_path = os.path.join(out_dir, "report.json")
    traj.to_csv(csv_path)
    report = build_report(spec, metrics, invariants, [csv_path, report_path], seed)
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def _load(path, overrides, err):
    try:
        return config.load(path, overrides), None
    except ConfigParseError as exc:
        print(f"error: cannot parse {path}: {exc}", file=err)
        return None, EXIT_PARSE
    except ConfigurationError as exc:
        print(f"error: invalid config {path}: {exc}", file=err)
        return None, EXIT_VALIDATION


def cmd_run(args, out=None, err=None):
    out, err = out or sys.stdout, err or sys.stderr
    overrides = {"override_gain_check": True} if args.override_gain_check else {}
    spec, code = _load(args.config, overrides, err)
    if spec is None:
        return code
    try:
        report = execute(spec, args.out, args.seed)
    except (SimulationError, InfeasibleError) as exc:
        step = getattr(exc, "step", None)
        print(f"error: simulation aborted at step {step}: {exc}", file=err)
        return EXIT_SIMULATION
    print(json.dumps({k: report[k] for k in ("scenario", "config_hash", "metrics", "all_passed")},
                     indent=2), file=out)
    for r in report["invariants"]:
        if not r["passed"]:
            print(f"invariant {r['name']} failed at row {r['row']} "
                  f"(worst violation {r['worst_violation']:.3g})", file=err)
    return EXIT_OK if report["all_passed"] else EXIT_INVARIANT


def verify(csv_path, spec):
    """Offline invariant results for a trajectory file; ``ValueError`` on schema mismatch."""
    traj = Trajectory.from_csv(csv_path)
    n, p_clf, p_cbf, m = checks.expected_layout(spec)
    got = (traj.x.shape[1], traj.theta_clf.shape[1], traj.theta_cbf.shape[1], traj.u.shape[1])
    if got != (n, p_clf, p_cbf, m):
        raise ValueError(f"{csv_path}: column counts {got} do not match a {spec.scenario} "
                         f"trajectory {(n, p_clf, p_cbf, m)}")
    if len(traj) < 2:
        raise ValueError(f"{csv_path}: need at least two samples")
    return checks.check(spec, traj)


def cmd_verify(args, out=None, err=None):
    out, err = out or sys.stdout, err or sys.stderr
    spec, code = _load(args.config, {"override_gain_check": True}, err)
    if spec is None:
        return code
    try:
        results = verify(args.trajectory, spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARSE
    passed = all(r.passed for r in results)
    print(json.dumps(_clean({"schema_version": SCHEMA_VERSION, "scenario": spec.scenario,
                             "config_hash": spec.config_hash,
                             "invariants": [r.as_dict() for r in results],
                             "all_passed": passed}), indent=2), file=out)
    return EXIT_OK if passed else EXIT_INVARIANT


def parse_vary(items):
    """``["gamma=6,13.03", ...]`` -> ``[("gamma", [6, 13.03]), ...]``."""
    grid = []
    for item in items:
        key, sep, values = item.partition("=")
        if not sep or not key:
            raise ValueError(f"--vary expects key=v1,v2,..., got {item!r}")
        vals = [config.parse_value(v.strip()) for v in values.split(",") if v.strip()]
        if vals:
            grid.append((key.strip(), vals))
    return grid


def _sweep_one(job):
    index, path, overrides, out_dir = job
    row = {"index": index, **{k: json.dumps(v) for k, v in overrides.items()}}
    try:
        spec = config.load(path, overrides)
    except (ConfigParseError, ConfigurationError) as exc:
        return {**row, "status": "invalid", "error": str(exc)}
    row["config_hash"] = spec.config_hash
    try:
        report = execute(spec, os.path.join(out_dir, f"run_{index:03d}"))
    except (SimulationError, InfeasibleError) as exc:
        return {**row, "status": "aborted", "error": str(exc)}
    row["status"] = "passed" if report["all_passed"] else "invariant_failed"
    row.update({f"metric:{k}": v for k, v in report["metrics"].items()})
    row.update({f"invariant:{r['name']}": r["passed"] for r in report["invariants"]})
    return row


def sweep(path, grid, out_dir, jobs=1, base_overrides=None):
    """Cartesian product over ``grid``; one row per combination, in grid order."""
    keys = [k for k, _ in grid]
    combos = list(itertools.product(*[v for _, v in grid])) if grid else [()]
    jobs_list = [(i, path, {**(base_overrides or {}), **dict(zip(keys, combo))}, out_dir)
                 for i, combo in enumerate(combos)]
    os.makedirs(out_dir, exist_ok=True)
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs_list))
    else:
        rows = [_sweep_one(j) for j in jobs_list]
    columns = []
    for row in rows:
        columns.extend(c for c in row if c not in columns)
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)
    return rows


def cmd_sweep(args, out=None, err=None):
    out, err = out or sys.stdout, err or sys.stderr
    spec, code = _load(args.config, {"override_gain_check": True}, err)
    if spec is None:
        return code
    try:
        grid = parse_vary(args.vary)
    except ValueError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PARSE
    base = {"override_gain_check": True} if args.override_gain_check else {}
    rows = sweep(args.config, grid, args.out, args.jobs, base)
    for row in rows:
        print(f"run {row['index']:3d}: {row['status']}", file=out)
    print(f"wrote {os.path.join(args.out, 'sweep.csv')}", file=out)
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(prog="adaptive-safety",
                                     description="Adaptive CLF/CBF scenario runner.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario file")
    run.add_argument("config")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None,
                     help="recorded in the report; the scenarios are deterministic")
    run.add_argument("--override-gain-check", action="store_true",
                     help="run even if the adaptation gain is below the safety bound")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="recheck invariants of a saved trajectory")
    ver.add_argument("trajectory")
    ver.add_argument("config")
    ver.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="run a grid of config variations")
    sw.add_argument("config")
    sw.add_argument("--vary", action="append", default=[], metavar="KEY=V1,V2,...")
    sw.add_argument("--out", required=True)
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--override-gain-check", action="store_true")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
