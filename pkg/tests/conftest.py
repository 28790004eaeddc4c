import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nasinit.cells import (
    CONV1X1,
    CONV3X3,
    CellSpec,
    INPUT,
    MAXPOOL3X3,
    OUTPUT,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def chain_cell(n_nodes: int, op: str = CONV3X3) -> CellSpec:
    """Simple input -> op -> ... -> output chain."""
    adjacency = tuple(
        tuple(1 if j == i + 1 else 0 for j in range(n_nodes)) for i in range(n_nodes)
    )
    ops = (INPUT,) + (op,) * (n_nodes - 2) + (OUTPUT,)
    return CellSpec(adjacency, ops)


def dense_seven_cell() -> CellSpec:
    """7 nodes, exactly 9 edges, every node on an input-output path."""
    edges = {(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (0, 2), (1, 3)}
    adjacency = tuple(
        tuple(1 if (i, j) in edges else 0 for j in range(7)) for i in range(7)
    )
    ops = (INPUT, CONV3X3, CONV1X1, MAXPOOL3X3, CONV3X3, CONV1X1, OUTPUT)
    return CellSpec(adjacency, ops)


def optimal_cell() -> CellSpec:
    """7 nodes, 9 edges, all intermediates conv3x3 (the surrogate optimum)."""
    edges = {(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (0, 6), (0, 2), (1, 3)}
    adjacency = tuple(
        tuple(1 if (i, j) in edges else 0 for j in range(7)) for i in range(7)
    )
    ops = (INPUT,) + (CONV3X3,) * 5 + (OUTPUT,)
    return CellSpec(adjacency, ops)


def three_blobs(rng, per_blob=50, spread=0.1):
    centers = np.array([[0.0, 0.0], [5.0, 5.0], [10.0, 0.0]])
    X = np.vstack([rng.normal(c, spread, size=(per_blob, 2)) for c in centers])
    truth = np.repeat(np.arange(3), per_blob)
    return X, truth, centers
