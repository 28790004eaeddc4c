"""Rank-sum significance tests, occurrence matrices, calibration sweeps, and
convergence exports."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .bench import encode_matrix
from .cells import CellSpec, EDGE_PAIRS, MAX_NODES, cell_to_genome, prune
from .clustering import kmeans_fit
from .dimred import fit_pca, fit_tsvd, transform
from .sampling import sample_uniform
from .validity import calinski_harabasz, davies_bouldin, silhouette

EXACT = "EXACT"
NORMAL_APPROX = "NORMAL_APPROX"

_EXACT_LIMIT = 10

TRACE_COLUMNS = (
    "run_id",
    "generation",
    "evaluations",
    "mean_fit",
    "min_fit",
    "max_fit",
    "best_so_far",
)


@dataclass(frozen=True)
class RankSumResult:
    statistic: float  # rank sum of the first sample (midranks)
    two_sided_p: float
    method: str


def _exact_two_sided(w: int, n: int, total: int) -> float:
    """Exact p by counting size-n subsets of ranks 1..total whose rank sum is
    at least as extreme (two-sided, around the symmetric mean) as w.

    Works on doubled integers so the half-integer mean needs no floats.
    """
    mu2 = n * (total + 1)  # 2 * E[W]
    d_obs = abs(2 * w - mu2)
    max_sum = total * (total + 1) // 2
    counts = np.zeros((n + 1, max_sum + 1), dtype=float)
    counts[0, 0] = 1.0
    for rank in range(1, total + 1):
        for j in range(min(n, rank), 0, -1):
            counts[j, rank:] += counts[j - 1, : max_sum + 1 - rank]
    sums = np.arange(max_sum + 1)
    extreme = np.abs(2 * sums - mu2) >= d_obs
    favourable = counts[n, extreme].sum()
    return float(favourable / counts[n].sum())


def wilcoxon_rank_sum(a, b) -> RankSumResult:
    """Two-sided rank-sum test of two independent samples.

    Small tie-free samples (both sizes <= 10) get the exact permutation
    distribution; everything else uses the normal approximation with midranks,
    tie-corrected variance, and a continuity correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    total = n + m
    ranks = rankdata(pooled)
    w = float(ranks[:n].sum())
    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool((tie_counts > 1).any())

    if n <= _EXACT_LIMIT and m <= _EXACT_LIMIT and not has_ties:
        p = _exact_two_sided(int(round(w)), n, total)
        return RankSumResult(w, min(max(p, np.finfo(float).tiny), 1.0), EXACT)

    mean = n * (total + 1) / 2.0
    tie_term = float((tie_counts**3 - tie_counts).sum()) / (total * (total - 1))
    var = n * m / 12.0 * ((total + 1) - tie_term)
    if var <= 0:
        return RankSumResult(w, 1.0, NORMAL_APPROX)
    shift = w - mean
    z = (shift - 0.5 * np.sign(shift)) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return RankSumResult(w, min(max(p, np.finfo(float).tiny), 1.0), NORMAL_APPROX)


@dataclass(frozen=True)
class OccurrenceMatrix:
    """Per-entry connection frequency over the 7-slot frame embeddings of a
    set of solutions."""

    counts: np.ndarray  # (7, 7) ints
    n_solutions: int
    normalized: np.ndarray  # counts / n_solutions (zeros when empty)


def occurrence_matrix(solutions) -> OccurrenceMatrix:
    counts = np.zeros((MAX_NODES, MAX_NODES), dtype=int)
    n = 0
    for cell in solutions:
        genome = cell_to_genome(prune(cell))
        for bit, (i, j) in zip(genome.edge_bits, EDGE_PAIRS):
            counts[i, j] += bit
        n += 1
    normalized = counts / n if n else counts.astype(float)
    return OccurrenceMatrix(counts, n, normalized)


def quartile_summary(values) -> dict:
    values = np.asarray(values, dtype=float)
    lo, q1, med, q3, hi = np.percentile(values, [0, 25, 50, 75, 100])
    return {"min": float(lo), "q1": float(q1), "median": float(med), "q3": float(q3), "max": float(hi)}


def write_trace_csv(path, runs) -> None:
    """All runs in one convergence CSV, one row per (run, generation)."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for run_id, trace in enumerate(runs):
            for row in trace.rows:
                writer.writerow(
                    [
                        run_id,
                        row.generation,
                        row.evaluations,
                        row.mean_fit,
                        row.min_fit,
                        row.max_fit,
                        row.best_so_far,
                    ]
                )


def export_traces(runs, out_dir, name: str) -> dict:
    """Write the group's convergence CSV plus a JSON summary of the per-run
    final test accuracies (boxplot-style quartiles).  Returns the summary."""
    os.makedirs(out_dir, exist_ok=True)
    write_trace_csv(os.path.join(out_dir, f"{name}_convergence.csv"), runs)
    finals_test = [trace.best_test_acc for trace in runs]
    finals_valid = [trace.best_valid_acc for trace in runs]
    summary = {
        "name": name,
        "n_runs": len(runs),
        "final_test": {"values": finals_test, **quartile_summary(finals_test)},
        "final_valid": {"values": finals_valid, **quartile_summary(finals_valid)},
    }
    with open(os.path.join(out_dir, f"{name}_summary.json"), "w", encoding="utf-8") as handle:
        json.dump(summary, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return summary


CALIBRATION_COLUMNS = (
    "encoding",
    "reducer",
    "components",
    "sample_size",
    "n_clusters",
    "seed",
    "silhouette",
    "calinski_harabasz",
    "davies_bouldin",
)


def calibration_sweep(
    bench,
    seed: int,
    encodings=("short",),
    reducers=("tsvd",),
    components=(2,),
    sample_sizes=(1000,),
    cluster_counts=(10,),
    n_init: int = 50,
    max_iter: int = 500,
) -> list[dict]:
    """Grid sweep: sample, encode, reduce, k-means, and score the three
    validity indices per grid point.  Point seeds derive as seed XOR index so
    rows are pure functions of (grid point, seed)."""
    rows = []
    index = 0
    for encoding in encodings:
        for reducer in reducers:
            for comp in components:
                for size in sample_sizes:
                    for k in cluster_counts:
                        if k < 2:
                            raise ValueError(f"need at least 2 clusters, got {k}")
                        point_seed = (int(seed) ^ index) & 0x7FFFFFFF
                        index += 1
                        samples = sample_uniform(size, point_seed)
                        X = encode_matrix(samples.cells, bench, encoding)
                        fit = fit_pca if reducer == "pca" else fit_tsvd
                        reduced = transform(fit(X, comp), X)
                        _, assignment = kmeans_fit(
                            reduced, k, n_init=n_init, max_iter=max_iter, rng=point_seed
                        )
                        rows.append(
                            {
                                "encoding": encoding,
                                "reducer": reducer,
                                "components": comp,
                                "sample_size": size,
                                "n_clusters": k,
                                "seed": point_seed,
                                "silhouette": silhouette(reduced, assignment.labels),
                                "calinski_harabasz": calinski_harabasz(reduced, assignment.labels),
                                "davies_bouldin": davies_bouldin(reduced, assignment.labels),
                            }
                        )
    return rows


def write_calibration_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=CALIBRATION_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
