"""Dense PCA and truncated SVD for reducing feature vectors before clustering.

Both use an exact SVD (inputs stay modest, at most ~1e4 x 298) and a
deterministic sign convention so repeated fits are bit-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

PCA = "pca"
TSVD = "tsvd"


@dataclass(frozen=True)
class ReductionModel:
    kind: str  # "pca" | "tsvd"
    components: int
    basis: np.ndarray  # (k, d), orthonormal rows
    singular_values: np.ndarray  # (k,), non-increasing
    mean: np.ndarray | None  # (d,) for PCA, None for TSVD

    @property
    def input_dim(self) -> int:
        return self.basis.shape[1]

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "components": self.components,
            "basis": self.basis.tolist(),
            "singular_values": self.singular_values.tolist(),
            "mean": None if self.mean is None else self.mean.tolist(),
        }


def model_from_json_dict(obj: dict) -> ReductionModel:
    mean = obj.get("mean")
    return ReductionModel(
        kind=obj["kind"],
        components=int(obj["components"]),
        basis=np.asarray(obj["basis"], dtype=float),
        singular_values=np.asarray(obj["singular_values"], dtype=float),
        mean=None if mean is None else np.asarray(mean, dtype=float),
    )


def save_model(path, model: ReductionModel) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model.to_json_dict(), handle, sort_keys=True, indent=2)
        handle.write("\n")


def load_model(path) -> ReductionModel:
    with open(path, "r", encoding="utf-8") as handle:
        return model_from_json_dict(json.load(handle))


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip each direction so its largest-magnitude coordinate is positive
    (first such coordinate on ties), making fits reproducible."""
    fixed = basis.copy()
    for row in fixed:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return fixed


def _fit(X: np.ndarray, k: int, kind: str, center: bool) -> ReductionModel:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    k_max = min(n - 1, d)
    if not 1 <= k <= k_max:
        raise ValueError(f"components must lie in [1, {k_max}], got {k}")
    mean = X.mean(axis=0) if center else None
    work = X - mean if center else X
    _, s, vt = np.linalg.svd(work, full_matrices=False)
    return ReductionModel(
        kind=kind,
        components=k,
        basis=_fix_signs(vt[:k]),
        singular_values=s[:k].copy(),
        mean=mean,
    )


def fit_pca(X, k: int) -> ReductionModel:
    """Top-k principal directions of the mean-centered data."""
    return _fit(X, k, PCA, center=True)


def fit_tsvd(X, k: int) -> ReductionModel:
    """Top-k right singular directions of the raw (uncentered) data, the
    variant suited to sparse inputs."""
    return _fit(X, k, TSVD, center=False)


def transform(model: ReductionModel, X) -> np.ndarray:
    """Project rows of X onto the fitted basis (centering first iff PCA)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(
            f"expected shape (n, {model.input_dim}), got {X.shape}"
        )
    work = X - model.mean if model.mean is not None else X
    return work @ model.basis.T
