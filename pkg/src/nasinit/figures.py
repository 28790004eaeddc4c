"""Matplotlib renderings of the report artifacts: convergence curves,
final-fitness boxplots, occurrence heatmaps, and calibration curves.

Everything renders to files (Agg backend) so the report stage works headless;
the numeric CSV/JSON artifacts stay the source of truth.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

INIT_COLORS = {"rand": "tab:red", "lhs": "tab:blue", "centroids": "tab:green"}


def _color(init: str) -> str:
    return INIT_COLORS.get(init, "tab:gray")


def convergence_figure(traces_by_init, title: str, out_path) -> None:
    """Mean population fitness per generation (bold) with the min/max range
    shaded, one color per initialization method."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for init in sorted(traces_by_init):
        traces = traces_by_init[init]
        evals = np.array([row.evaluations for row in traces[0].rows])
        means = np.mean([[row.mean_fit for row in t.rows] for t in traces], axis=0)
        lows = np.min([[row.min_fit for row in t.rows] for t in traces], axis=0)
        highs = np.max([[row.max_fit for row in t.rows] for t in traces], axis=0)
        color = _color(init)
        ax.plot(evals, means, color=color, lw=2, label=init)
        ax.fill_between(evals, lows, highs, color=color, alpha=0.15, lw=0)
    ax.set_xlabel("evaluations")
    ax.set_ylabel("validation accuracy")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def boxplot_figure(finals_by_label, title: str, out_path) -> None:
    """Boxplots of final test accuracy, one box per (algo, init) label."""
    labels = sorted(finals_by_label)
    data = [finals_by_label[label] for label in labels]
    fig, ax = plt.subplots(figsize=(max(6, 1.1 * len(labels)), 4.5))
    boxes = ax.boxplot(data, tick_labels=labels, patch_artist=True)
    for patch, label in zip(boxes["boxes"], labels):
        init = label.rsplit("/", 1)[-1]
        patch.set_facecolor(_color(init))
        patch.set_alpha(0.5)
    ax.set_ylabel("test accuracy")
    ax.set_title(title)
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def occurrence_figure(matrix, title: str, out_path) -> None:
    """Heatmap of connection frequencies over the 7-slot adjacency frame."""
    fig, ax = plt.subplots(figsize=(5, 4.5))
    image = ax.imshow(matrix.normalized, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xlabel("target node")
    ax.set_ylabel("source node")
    ax.set_title(f"{title} (n={matrix.n_solutions})")
    fig.colorbar(image, ax=ax, label="frequency")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def calibration_figure(rows, out_path) -> None:
    """Three panels (silhouette, Calinski-Harabasz, Davies-Bouldin) against
    the cluster count, one line per (encoding, reducer, sample size)."""
    metrics = ("silhouette", "calinski_harabasz", "davies_bouldin")
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["encoding"], row["reducer"], row["components"], row["sample_size"])
        groups.setdefault(key, []).append(row)
    fig, axes = plt.subplots(1, 3, figsize=(14, 4.2))
    for ax, metric in zip(axes, metrics):
        for key in sorted(groups):
            pts = sorted(groups[key], key=lambda r: r["n_clusters"])
            xs = [p["n_clusters"] for p in pts]
            ys = [p[metric] for p in pts]
            label = f"{key[0]}/{key[1]}-{key[2]} n={key[3]}"
            ax.plot(xs, ys, marker="o", ms=3, label=label)
        ax.set_xlabel("clusters")
        ax.set_ylabel(metric)
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
