"""Initial populations: cluster-centroid medoids, uniform random, and LHS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bench import canonical_key
from .bgm import BgmModel
from .cells import CellSpec, Genome, cell_to_genome
from .clustering import KMeansModel
from .sampling import SampleSet, sample_lhs, sample_uniform

CENTROIDS = "centroids"
RAND = "rand"
LHS = "lhs"


@dataclass(frozen=True)
class InitialPopulation:
    cells: tuple[CellSpec, ...]
    genomes: tuple[Genome, ...]
    method: str
    # For centroid populations: (component index, distance to centroid) per cell.
    provenance: tuple[tuple[int, float], ...] | None = None

    def __len__(self) -> int:
        return len(self.genomes)


def extract_centroids(model) -> np.ndarray:
    """Cluster centers in reduced space: all k-means centers, or the means of
    the mixture's effective components ordered by descending weight."""
    if isinstance(model, KMeansModel):
        return model.centers.copy()
    if isinstance(model, BgmModel):
        effective = model.effective_components
        order = sorted(effective, key=lambda c: (-model.weights[c], c))
        return model.means[list(order)].copy()
    raise TypeError(f"cannot extract centroids from {type(model).__name__}")


def centroids_to_population(centroids, samples: SampleSet, reduced) -> InitialPopulation:
    """Pick the nearest sampled cell (medoid) for each centroid in order.

    Duplicates by canonical key fall through to the next-nearest unused
    sample, so the population is pairwise distinct.  Performance features
    play no role here; only the cells enter the population.
    """
    centroids = np.asarray(centroids, dtype=float)
    reduced = np.asarray(reduced, dtype=float)
    if reduced.shape[0] != len(samples.cells):
        raise ValueError("reduced rows must correspond 1:1 to samples")
    keys = [canonical_key(cell) for cell in samples.cells]
    if len(set(keys)) < len(centroids):
        raise ValueError(
            f"only {len(set(keys))} distinct samples for {len(centroids)} centroids"
        )
    used: set[str] = set()
    cells, genomes, provenance = [], [], []
    for comp_idx, centroid in enumerate(centroids):
        dist = np.linalg.norm(reduced - centroid, axis=1)
        for sample_idx in np.argsort(dist, kind="stable"):
            if keys[sample_idx] in used:
                continue
            used.add(keys[sample_idx])
            cell = samples.cells[sample_idx]
            cells.append(cell)
            genomes.append(cell_to_genome(cell))
            provenance.append((comp_idx, float(dist[sample_idx])))
            break
    return InitialPopulation(tuple(cells), tuple(genomes), CENTROIDS, tuple(provenance))


def init_random(pop_size: int, seed: int) -> InitialPopulation:
    samples = sample_uniform(pop_size, seed)
    return InitialPopulation(samples.cells, samples.genomes, RAND)


def init_lhs(pop_size: int, seed: int) -> InitialPopulation:
    samples = sample_lhs(pop_size, seed)
    return InitialPopulation(samples.cells, samples.genomes, LHS)
