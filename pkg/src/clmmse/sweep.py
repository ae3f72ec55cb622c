"""Partition enumeration, precomputation cost accounting, and full sweeps.

A sweep builds one gain tree per set partition of the mode set, records the
analytic mean square error at the horizon, optionally cross-checks it by
Monte Carlo, and emits a CSV row per partition.  The CSV schema is fixed:

    clustering,n_clusters,analytic_mse,mc_mse,mc_stderr,stored_gains,build_ms
"""

from __future__ import annotations

import csv
import sys
import time
from dataclasses import dataclass

from .model import Clustering, MjlsModel, partition_label
from .riccati import BudgetExceededError, build_tree, expected_sq_error
from .sim import monte_carlo_mse

MAX_ENUM_MODES = 12  # Bell(12) = 4,213,597; beyond this enumeration is refused

CSV_HEADER = ["clustering", "n_clusters", "analytic_mse", "mc_mse", "mc_stderr",
              "stored_gains", "build_ms"]


def enumerate_partitions(n: int) -> list[Clustering]:
    """All set partitions of {1..n} via restricted-growth strings.

    Emitted in lexicographic RGS order; each partition's clusters are ordered
    by first appearance, which coincides with the canonical label order.
    """
    if not 1 <= n <= MAX_ENUM_MODES:
        raise ValueError(f"n must be in 1..{MAX_ENUM_MODES} (Bell-number guard), got {n}")
    out = []
    a = [0] * n
    while True:
        blocks: list[list[int]] = [[] for _ in range(max(a) + 1)]
        for i, b in enumerate(a):
            blocks[b].append(i + 1)
        out.append(Clustering(tuple(tuple(b) for b in blocks), n))
        for i in range(n - 1, 0, -1):
            if a[i] <= max(a[:i]):
                a[i] += 1
                for j in range(i + 1, n):
                    a[j] = 0
                break
        else:
            return out


def refines(fine: Clustering, coarse: Clustering) -> bool:
    """True when every cluster of ``fine`` lies inside a cluster of ``coarse``."""
    coarse_sets = [set(b) for b in coarse.clusters]
    return all(any(set(b) <= c for c in coarse_sets) for b in fine.clusters)


@dataclass(frozen=True)
class CostReport:
    """Closed-form precomputation counts for one (N, n_clusters, s) design.

    ``per_depth_matrices[k] = N * n_clusters**k`` is the number of moment
    matrices (equivalently gains) computed at depth k, for k = 0..s-1.  One
    SPD factorization is performed per stored gain: the factorization at a
    (node, mode) pair serves both that pair's gain and the moment update it
    feeds into the children, so ``total_factorizations == total_gains``.
    """

    n_modes: int
    n_clusters: int
    horizon: int
    per_depth_matrices: tuple[int, ...]
    total_gains: int
    total_factorizations: int


def cost_report(n_modes: int, n_clusters: int, s: int) -> CostReport:
    if n_clusters > n_modes:
        raise ValueError(f"n_clusters={n_clusters} exceeds n_modes={n_modes}")
    if s < 1:
        raise ValueError("horizon must be >= 1")
    per_depth = tuple(n_modes * n_clusters ** k for k in range(s))
    total = sum(per_depth)  # = N (nc^s - 1)/(nc - 1) for nc > 1, s N for nc = 1
    return CostReport(
        n_modes=n_modes, n_clusters=n_clusters, horizon=s,
        per_depth_matrices=per_depth, total_gains=total, total_factorizations=total,
    )


@dataclass(frozen=True)
class SweepRow:
    """One partition's outcome; ``skipped`` carries the reason for empty rows
    (it is not serialized, the numeric CSV fields are simply left blank)."""

    clustering_label: str
    n_clusters: int
    analytic_mse: float | None
    mc_mse: float | None
    mc_std_error: float | None
    stored_gains: int
    build_millis: float | None
    skipped: str | None = None


def run_sweep(model: MjlsModel, s: int, trials: int = 0, seed: int | None = None,
              *, budget_scalars: int | None = None, log=None) -> list[SweepRow]:
    """One row per set partition of the mode set, sorted by (n_clusters, label)."""
    if trials and seed is None:
        raise ValueError("Monte Carlo columns require an explicit seed")
    log = log if log is not None else sys.stderr
    rows = []
    for part_index, clustering in enumerate(enumerate_partitions(model.n_modes)):
        label = partition_label(clustering)
        report = cost_report(model.n_modes, clustering.n_clusters, s)
        try:
            t0 = time.perf_counter()
            tree = build_tree(model, clustering, s, budget_scalars=budget_scalars)
            build_ms = (time.perf_counter() - t0) * 1e3
        except BudgetExceededError as exc:
            print(f"sweep: skipping {label}: {exc}", file=log)
            rows.append(SweepRow(label, clustering.n_clusters, None, None, None,
                                 report.total_gains, None, skipped=str(exc)))
            continue
        mc_mean = mc_se = None
        if trials:
            mc = monte_carlo_mse(model, clustering, tree, s, trials,
                                 seed + part_index)
            mc_mean, mc_se = mc.mean, mc.std_error
        rows.append(SweepRow(
            clustering_label=label,
            n_clusters=clustering.n_clusters,
            analytic_mse=expected_sq_error(tree, s),
            mc_mse=mc_mean,
            mc_std_error=mc_se,
            stored_gains=report.total_gains,
            build_millis=build_ms,
        ))
    rows.sort(key=lambda r: (r.n_clusters, r.clustering_label))
    return rows


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    """Analytic values keep full precision; MC values are rounded to 6
    significant digits so reruns with the same seed are byte-identical."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([
                r.clustering_label,
                r.n_clusters,
                "" if r.analytic_mse is None else repr(float(r.analytic_mse)),
                "" if r.mc_mse is None else format(r.mc_mse, ".6g"),
                "" if r.mc_std_error is None else format(r.mc_std_error, ".6g"),
                r.stored_gains,
                "" if r.build_millis is None else format(r.build_millis, ".3f"),
            ])


def sweep(model: MjlsModel, s: int, trials: int, seed: int | None, out_path,
          *, budget_scalars: int | None = None) -> list[SweepRow]:
    """Run the full partition sweep and write the CSV; returns the rows."""
    rows = run_sweep(model, s, trials, seed, budget_scalars=budget_scalars)
    write_sweep_csv(rows, out_path)
    return rows
