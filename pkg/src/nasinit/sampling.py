"""Architecture sampling: uniform rejection sampling and Latin hypercube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import (
    CellSpec,
    GENOME_LENGTH,
    Genome,
    INTERMEDIATE_OPS,
    NUM_EDGE_BITS,
    genome_to_cell,
    validate,
)
from .util import ensure_rng

UNIFORM = "uniform"
LHS = "lhs"

_MAX_REJECTIONS = 10**6


@dataclass(frozen=True)
class SampleSet:
    """Sampled architectures: the raw genomes plus their pruned decodes.

    Uniform sampling rejects invalid decodes, so its cells are all valid.
    Latin hypercube sampling never rejects (that would break stratification);
    its invalid decodes are kept and score fitness 0 downstream.
    """

    genomes: tuple[Genome, ...]
    cells: tuple[CellSpec, ...]
    seed: int
    method: str

    def __len__(self) -> int:
        return len(self.genomes)


def random_genome(rng: np.random.Generator) -> Genome:
    bits = tuple(int(b) for b in rng.integers(0, 2, size=NUM_EDGE_BITS))
    ops = tuple(INTERMEDIATE_OPS[i] for i in rng.integers(0, 3, size=5))
    return Genome(bits, ops)


def sample_valid_genome(rng: np.random.Generator) -> tuple[Genome, CellSpec]:
    """Draw uniform genomes until one decodes to a valid cell."""
    for _ in range(_MAX_REJECTIONS):
        genome = random_genome(rng)
        cell = genome_to_cell(genome)
        if validate(cell).valid:
            return genome, cell
    raise RuntimeError(f"no valid cell after {_MAX_REJECTIONS} rejection attempts")


def sample_uniform(n: int, seed: int) -> SampleSet:
    """n valid cells from uniform genomes (edge bits Bernoulli(1/2), op genes
    uniform over the three operations), rejection-sampled."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = ensure_rng(seed)
    genomes, cells = [], []
    for _ in range(n):
        genome, cell = sample_valid_genome(rng)
        genomes.append(genome)
        cells.append(cell)
    return SampleSet(tuple(genomes), tuple(cells), int(seed), UNIFORM)


def latin_hypercube(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """n x dims design in [0, 1): per dimension, one point per stratum
    [k/n, (k+1)/n) in an independently permuted order."""
    u = np.empty((n, dims))
    for d in range(dims):
        strata = rng.permutation(n)
        u[:, d] = (strata + rng.random(n)) / n
    return u


def sample_lhs(n: int, seed: int) -> SampleSet:
    """n genomes from a 26-dimensional Latin hypercube.

    Edge dimensions threshold at 0.5; op dimensions split into thirds in the
    listing order conv3x3 / conv1x1 / maxpool3x3.  Invalid decodes are kept.
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = ensure_rng(seed)
    u = latin_hypercube(n, GENOME_LENGTH, rng)
    genomes, cells = [], []
    for row in u:
        bits = tuple(int(v >= 0.5) for v in row[:NUM_EDGE_BITS])
        ops = tuple(INTERMEDIATE_OPS[min(int(v * 3), 2)] for v in row[NUM_EDGE_BITS:])
        genome = Genome(bits, ops)
        genomes.append(genome)
        cells.append(genome_to_cell(genome))
    return SampleSet(tuple(genomes), tuple(cells), int(seed), LHS)
