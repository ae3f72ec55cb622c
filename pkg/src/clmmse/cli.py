"""Command-line driver.

Subcommands: validate, design, evaluate, filter, simulate, sweep, info.
Failures exit nonzero after printing one machine-parsable line of the form
``error: <category>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import filter as flt
from . import riccati, sim
from .sweep import cost_report, sweep as run_partition_sweep
from .markov import stream
from .model import (ModelFormatError, load_model, parse_clustering,
                    partition_label, validate)


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _load_model(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        raise CliError("io", f"model file not found: {path}") from None
    except ModelFormatError as exc:
        raise CliError("parse", str(exc)) from None


def _load_tree(path):
    try:
        return riccati.load_tree(path)
    except FileNotFoundError:
        raise CliError("io", f"tree file not found: {path}") from None
    except (ValueError, KeyError) as exc:
        raise CliError("parse", f"{path}: {exc}") from None


def cmd_validate(args) -> int:
    report = validate(_load_model(args.model))
    if report.ok:
        print("ok")
        return 0
    for v in report.violations:
        where = "" if v.index is None else f" [index {v.index}]"
        print(f"error: validation: {v.rule}: {v.message}{where}", file=sys.stderr)
    return 1


def cmd_design(args) -> int:
    model = _load_model(args.model)
    report = validate(model)
    if not report.ok:
        raise CliError("validation", "; ".join(v.message for v in report.violations))
    try:
        clustering = parse_clustering(args.clusters, model.n_modes)
    except ModelFormatError as exc:
        raise CliError("parse", f"--clusters: {exc}") from None
    try:
        tree = riccati.build_tree(model, clustering, args.horizon)
    except riccati.BudgetExceededError as exc:
        raise CliError("budget", str(exc)) from None
    riccati.save_tree(tree, args.out)
    print(f"clustering {partition_label(clustering)} horizon {args.horizon} "
          f"stored_gains {tree.stored_gain_count} -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    tree = _load_tree(args.tree)
    k = tree.horizon if args.k is None else args.k
    if not 0 <= k <= tree.horizon:
        raise CliError("usage", f"--k must be in 0..{tree.horizon}")
    print(repr(float(riccati.expected_sq_error(tree, k))))
    return 0


def cmd_filter(args) -> int:
    tree = _load_tree(args.tree)
    try:
        theta, y = flt.read_trajectory_csv(args.input)
    except FileNotFoundError:
        raise CliError("io", f"input file not found: {args.input}") from None
    except ValueError as exc:
        raise CliError("parse", str(exc)) from None
    if theta.shape[0] > tree.horizon:
        raise CliError("usage",
                       f"trajectory has {theta.shape[0]} steps, tree horizon is {tree.horizon}")
    try:
        xhat = flt.run_filter(tree.model, tree, theta, y)
    except riccati.UnreachableNodeError as exc:
        raise CliError("model", str(exc)) from None
    flt.write_estimates_csv(args.output, xhat)
    print(f"{xhat.shape[0]} estimates -> {args.output}")
    return 0


def cmd_simulate(args) -> int:
    model = _load_model(args.model)
    traj = sim.sample_trajectory(model, args.horizon, stream(args.seed, args.trial))
    flt.write_trajectory_csv(args.out, traj.theta[:-1] if args.horizon else traj.theta[:0],
                             traj.y)
    print(f"{args.horizon} steps -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    model = _load_model(args.model)
    report = validate(model)
    if not report.ok:
        raise CliError("validation", "; ".join(v.message for v in report.violations))
    if args.trials and args.seed is None:
        raise CliError("usage", "--trials requires an explicit --seed")
    rows = run_partition_sweep(model, args.horizon, args.trials, args.seed, args.out)
    skipped = sum(1 for r in rows if r.skipped)
    print(f"{len(rows)} partitions ({skipped} skipped) -> {args.out}")
    return 0


def cmd_info(args) -> int:
    if args.clusters > args.n:
        raise CliError("usage", f"--clusters must be <= --n ({args.n})")
    report = cost_report(args.n, args.clusters, args.horizon)
    per_depth = ", ".join(str(c) for c in report.per_depth_matrices)
    print(f"modes {report.n_modes}, clusters {report.n_clusters}, horizon {report.horizon}")
    print(f"matrices per depth (k=0..{report.horizon - 1}): {per_depth}")
    print(f"stored gains: {report.total_gains}")
    print(f"spd factorizations: {report.total_factorizations}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clmmse",
        description="Clustered-information LMMSE design, evaluation, and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check model admissibility")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("design", help="build and store a gain tree")
    p.add_argument("--model", required=True)
    p.add_argument("--clusters", required=True,
                   help='partition, e.g. "{1,2,3}|{4}" or [[1,2,3],[4]]')
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("evaluate", help="analytic mean square error from a stored tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--k", type=int, default=None, help="time index (default: horizon)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("filter", help="run the filter on a trajectory CSV")
    p.add_argument("--tree", required=True)
    p.add_argument("--input", required=True, help="CSV with columns k,theta,y_1..y_p")
    p.add_argument("--output", required=True, help="CSV with columns k,xhat_1..xhat_n")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("simulate", help="sample one trajectory to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="build every partition's tree and emit CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--trials", type=int, default=0,
                   help="Monte Carlo trials per partition (0 = analytic only)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("info", help="closed-form precomputation costs")
    p.add_argument("--n", type=int, required=True, help="number of modes")
    p.add_argument("--clusters", type=int, required=True, help="number of clusters")
    p.add_argument("--horizon", type=int, required=True)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
