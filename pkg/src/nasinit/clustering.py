"""k-means (kmeans++ seeding, Lloyd iterations) and DBSCAN."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .util import ensure_rng

NOISE = -1


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-sample integer labels; -1 marks DBSCAN noise.  Non-noise labels
    are dense 0..n_clusters-1."""

    labels: np.ndarray
    n_clusters: int = field(init=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "labels", labels)
        distinct = np.unique(labels[labels != NOISE])
        object.__setattr__(self, "n_clusters", int(distinct.size))


@dataclass(frozen=True)
class KMeansModel:
    centers: np.ndarray  # (k, d)
    inertia: float
    n_init: int
    max_iter: int
    # Inertia after each Lloyd assignment, one trace per restart.
    inertia_traces: tuple[tuple[float, ...], ...]
    best_restart: int

    def to_json_dict(self) -> dict:
        return {
            "kind": "kmeans",
            "centers": self.centers.tolist(),
            "inertia": self.inertia,
            "n_init": self.n_init,
            "max_iter": self.max_iter,
            "best_restart": self.best_restart,
        }


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_samples: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_samples < 1:
            raise ValueError(f"min_samples must be >= 1, got {self.min_samples}")


def _squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeanspp_seeds(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining mass on already-chosen points (duplicates)
            idx = int(rng.integers(n))
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def _repair_empty(X, centers, labels, counts) -> None:
    """Re-seed each empty cluster from the point farthest from its assigned
    center (ties and repeats resolved by ascending index)."""
    empties = np.flatnonzero(counts == 0)
    if empties.size == 0:
        return
    assigned = _squared_distances(X, centers)[np.arange(X.shape[0]), labels]
    taken: set[int] = set()
    for j in empties:
        order = np.argsort(-assigned, kind="stable")
        pick = next(int(i) for i in order if int(i) not in taken)
        taken.add(pick)
        centers[j] = X[pick]


def _lloyd(X, centers, max_iter):
    n, k = X.shape[0], centers.shape[0]
    d2 = _squared_distances(X, centers)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    trace = [inertia]
    for _ in range(max_iter):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, X)
        nonzero = counts > 0
        centers[nonzero] = sums[nonzero] / counts[nonzero, None]
        _repair_empty(X, centers, labels, counts)
        d2 = _squared_distances(X, centers)
        new_labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), new_labels].sum())
        trace.append(inertia)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels, inertia, tuple(trace)


def kmeans_fit(X, k: int, n_init: int = 50, max_iter: int = 500, rng=None):
    """Best of n_init kmeans++-seeded Lloyd runs, selected by (inertia,
    restart index).  Returns (KMeansModel, ClusterAssignment)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = ensure_rng(rng)
    best = None
    traces = []
    for restart in range(n_init):
        seeds = _kmeanspp_seeds(X, k, rng)
        centers, labels, inertia, trace = _lloyd(X, seeds, max_iter)
        traces.append(trace)
        if best is None or inertia < best[0]:
            best = (inertia, restart, centers, labels)
    inertia, best_restart, centers, labels = best
    model = KMeansModel(
        centers=centers,
        inertia=inertia,
        n_init=n_init,
        max_iter=max_iter,
        inertia_traces=tuple(traces),
        best_restart=best_restart,
    )
    return model, ClusterAssignment(labels)


def _neighbor_lists(X: np.ndarray, eps: float, chunk: int = 1024) -> list[np.ndarray]:
    """Indices within eps of each point (self included), computed in row
    chunks to keep memory flat for large samples."""
    sq = (X**2).sum(axis=1)
    lists: list[np.ndarray] = []
    for lo in range(0, X.shape[0], chunk):
        hi = min(lo + chunk, X.shape[0])
        d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (X[lo:hi] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        for row in d2 <= eps**2:
            lists.append(np.flatnonzero(row))
    return lists


def dbscan_fit(X, params: DbscanParams) -> ClusterAssignment:
    """Density clustering: core points have >= min_samples neighbors within
    eps (self included); clusters are density-connected cores plus border
    points, labeled in first-visited-core order."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    neighbor_lists = _neighbor_lists(X, params.eps)
    core = np.array([len(nb) >= params.min_samples for nb in neighbor_lists])
    labels = np.full(n, NOISE, dtype=int)
    cluster = 0
    for start in range(n):
        if labels[start] != NOISE or not core[start]:
            continue
        labels[start] = cluster
        queue = deque([start])
        while queue:
            point = queue.popleft()
            for nb in neighbor_lists[point]:
                if labels[nb] == NOISE:
                    labels[nb] = cluster
                    if core[nb]:
                        queue.append(int(nb))
        cluster += 1
    return ClusterAssignment(labels)
