"""Cluster validity indices: silhouette, Calinski-Harabasz, Davies-Bouldin.

All three ignore noise points (label -1) and require at least two clusters.
"""

from __future__ import annotations

import math

import numpy as np

from .clustering import NOISE


class DegenerateClusteringError(ValueError):
    """Clustering too degenerate for the index (e.g. coincident centroids)."""


def _clean(X, labels):
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if X.shape[0] != labels.shape[0]:
        raise ValueError("X and labels disagree on the number of samples")
    mask = labels != NOISE
    X, labels = X[mask], labels[mask]
    clusters = np.unique(labels)
    if clusters.size < 2:
        raise ValueError(f"need at least 2 clusters, got {clusters.size}")
    return X, labels, clusters


def _pairwise_distances(X: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Exact euclidean distance matrix from coordinate differences, computed
    in row chunks to bound memory for large samples."""
    n = X.shape[0]
    dist = np.empty((n, n))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        diff = X[lo:hi, None, :] - X[None, :, :]
        dist[lo:hi] = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
    return dist


def silhouette(X, labels) -> float:
    """Mean of (b - a) / max(a, b): a is the mean distance to the point's own
    cluster (excluding itself), b the smallest mean distance to another
    cluster.  Singleton clusters contribute 0."""
    X, labels, clusters = _clean(X, labels)
    n = X.shape[0]
    dist = _pairwise_distances(X)
    members = {c: np.flatnonzero(labels == c) for c in clusters}
    scores = np.empty(n)
    for i in range(n):
        own = members[labels[i]]
        if own.size == 1:
            scores[i] = 0.0
            continue
        a = dist[i, own].sum() / (own.size - 1)
        b = min(dist[i, members[c]].mean() for c in clusters if c != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def calinski_harabasz(X, labels) -> float:
    """Ratio of between- to within-cluster dispersion, each normalized by its
    degrees of freedom.  Zero within-dispersion yields +inf."""
    X, labels, clusters = _clean(X, labels)
    n, k = X.shape[0], clusters.size
    if n <= k:
        raise ValueError(f"need more samples than clusters, got {n} <= {k}")
    grand = X.mean(axis=0)
    within = 0.0
    between = 0.0
    for c in clusters:
        pts = X[labels == c]
        center = pts.mean(axis=0)
        within += ((pts - center) ** 2).sum()
        between += pts.shape[0] * ((center - grand) ** 2).sum()
    if within == 0.0:
        return math.inf
    return float((between / (k - 1)) / (within / (n - k)))


def davies_bouldin(X, labels) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d(c_i, c_j) similarity,
    where s is the mean member-to-centroid distance."""
    X, labels, clusters = _clean(X, labels)
    k = clusters.size
    centers = np.stack([X[labels == c].mean(axis=0) for c in clusters])
    spread = np.array(
        [np.linalg.norm(X[labels == c] - centers[i], axis=1).mean() for i, c in enumerate(clusters)]
    )
    ratios = np.zeros(k)
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if i == j:
                continue
            dij = np.linalg.norm(centers[i] - centers[j])
            if dij == 0.0:
                raise DegenerateClusteringError(
                    f"coincident centroids for clusters {clusters[i]} and {clusters[j]}"
                )
            worst = max(worst, (spread[i] + spread[j]) / dij)
        ratios[i] = worst
    return float(ratios.mean())
