"""Population-based search: GA, (mu+lambda) EA, aging evolution, random search.

All four share exact evaluation accounting: every candidate evaluation
(including invalid decodes, which score 0.0) increments the budget counter
once, and a generation/step only starts when its whole evaluation batch still
fits inside max_evaluations.  Given the same config and seed the trace is
byte-identical across runs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .cells import (
    CellSpec,
    GENOME_LENGTH,
    Genome,
    INTERMEDIATE_OPS,
    InvalidCellError,
    NUM_EDGE_BITS,
    NUM_OP_SLOTS,
    OP_CYCLE,
    embed_genome,
    genome_from_genes,
    genome_to_cell,
    validate,
)
from .initpop import InitialPopulation
from .sampling import sample_valid_genome
from .util import ensure_rng

GA = "ga"
EA = "ea"
AE = "ae"
RS = "rs"
ALGOS = (GA, EA, AE, RS)

_AE_RESAMPLE_CAP = 100


@dataclass(frozen=True)
class Individual:
    genome: Genome
    fitness: float
    birth_index: int  # evaluation counter at creation, used for AE aging / EA tie-breaks


@dataclass(frozen=True)
class SearchConfig:
    algo: str
    budget: int = 36
    pop_size: int = 19
    max_evaluations: int = 1995
    cx_p: float = 0.5
    mut_p: float = 0.2
    ind_pb: float = 0.05
    tournament_k: int = 10
    seed: int = 0
    init: str = "rand"


def default_search_config(algo: str, encoding: str = "short", **overrides) -> SearchConfig:
    """Per-algorithm defaults; population 19 / budget 1995 for the short
    encoding, 13 / 1989 for the long one."""
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}, expected one of {ALGOS}")
    if encoding == "short":
        base = SearchConfig(algo=algo, pop_size=19, max_evaluations=1995)
    elif encoding == "long":
        base = SearchConfig(algo=algo, pop_size=13, max_evaluations=1989)
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    if algo == GA:
        base = replace(base, mut_p=0.2, cx_p=0.5, ind_pb=0.05)
    elif algo == EA:
        base = replace(base, mut_p=0.8, ind_pb=0.1)
    elif algo == AE:
        base = replace(base, tournament_k=10)
    return replace(base, **overrides)


@dataclass(frozen=True)
class TraceRow:
    generation: int
    evaluations: int
    mean_fit: float
    min_fit: float
    max_fit: float
    best_so_far: float


@dataclass(frozen=True)
class SearchTrace:
    rows: tuple[TraceRow, ...]
    best_cell: CellSpec | None
    best_valid_acc: float
    best_test_acc: float
    algo: str
    init: str
    budget: int
    seed: int

    @property
    def evaluations(self) -> int:
        return self.rows[-1].evaluations


class FitnessEvaluator:
    """Decode, score, and count one evaluation per candidate.  Invalid decodes
    get the 0.0 sentinel without touching the benchmark."""

    def __init__(self, bench, budget: int):
        self.bench = bench
        self.budget = budget
        self.count = 0

    def evaluate(self, genome: Genome) -> Individual:
        cell = genome_to_cell(genome)
        if validate(cell).valid:
            fitness = float(self.bench.query(cell, self.budget, "valid"))
        else:
            fitness = 0.0
        individual = Individual(genome, fitness, self.count)
        self.count += 1
        return individual


def binary_tournament(pop, rng) -> Individual:
    """Two distinct contenders drawn uniformly; the fitter wins, first drawn
    on ties."""
    if len(pop) < 2:
        raise ValueError(f"binary tournament needs at least 2 individuals, got {len(pop)}")
    i, j = rng.choice(len(pop), size=2, replace=False)
    a, b = pop[int(i)], pop[int(j)]
    return a if a.fitness >= b.fitness else b


def single_point_crossover(parent_1: Genome, parent_2: Genome, cx_p: float, rng) -> Genome:
    """With probability cx_p, splice at a uniform cut in 1..25; otherwise
    return one parent unmodified (fair coin)."""
    if rng.random() < cx_p:
        cut = int(rng.integers(1, GENOME_LENGTH))
        return genome_from_genes(parent_1.genes()[:cut] + parent_2.genes()[cut:])
    return parent_1 if rng.random() < 0.5 else parent_2


def mutate_genome(genome: Genome, mut_p: float, ind_pb: float, rng) -> Genome:
    """With probability mut_p, mutate each gene independently with probability
    ind_pb: edge bits flip, op genes advance one step in the operation cycle."""
    if rng.random() >= mut_p:
        return genome
    draws = rng.random(GENOME_LENGTH) < ind_pb
    bits = tuple(
        b ^ 1 if draws[i] else b for i, b in enumerate(genome.edge_bits)
    )
    ops = tuple(
        OP_CYCLE[op] if draws[NUM_EDGE_BITS + i] else op
        for i, op in enumerate(genome.op_genes)
    )
    return Genome(bits, ops)


def _ae_mutate_genome(base: Genome, rng) -> tuple[Genome, CellSpec]:
    """Aging-evolution mutation on the embedded frame: toggle one edge bit
    (hidden-state mutation) and move one op slot to a different operation
    (operation mutation); resample both up to a cap until the decode is
    valid, then fall back to the unmodified input."""
    for _ in range(_AE_RESAMPLE_CAP):
        bits = list(base.edge_bits)
        edge = int(rng.integers(NUM_EDGE_BITS))
        bits[edge] ^= 1
        ops = list(base.op_genes)
        slot = int(rng.integers(NUM_OP_SLOTS))
        others = [op for op in INTERMEDIATE_OPS if op != ops[slot]]
        ops[slot] = others[int(rng.integers(2))]
        mutant = Genome(tuple(bits), tuple(ops))
        cell = genome_to_cell(mutant)
        if validate(cell).valid:
            return mutant, cell
    return base, genome_to_cell(base)


def ae_mutate(cell: CellSpec, rng) -> CellSpec:
    """Two-step aging-evolution mutation of a valid cell."""
    report = validate(cell)
    if not report.valid:
        raise InvalidCellError(f"cannot mutate invalid cell ({report.reason})")
    rng = ensure_rng(rng)
    _, mutated = _ae_mutate_genome(embed_genome(cell), rng)
    return mutated


def _stats_row(generation, evaluations, fits, best) -> TraceRow:
    return TraceRow(
        generation=generation,
        evaluations=evaluations,
        mean_fit=float(np.mean(fits)),
        min_fit=float(min(fits)),
        max_fit=float(max(fits)),
        best_so_far=best,
    )


def _finalize(rows, best: Individual | None, config, bench) -> SearchTrace:
    best_cell = None
    valid_acc = 0.0
    test_acc = 0.0
    if best is not None:
        best_cell = genome_to_cell(best.genome)
        valid_acc = best.fitness
        if validate(best_cell).valid:
            test_acc = float(bench.query(best_cell, config.budget, "test"))
    return SearchTrace(
        rows=tuple(rows),
        best_cell=best_cell,
        best_valid_acc=valid_acc,
        best_test_acc=test_acc,
        algo=config.algo,
        init=config.init,
        budget=config.budget,
        seed=config.seed,
    )


def _check_init_pop(init_pop: InitialPopulation, config: SearchConfig) -> None:
    if len(init_pop) != config.pop_size:
        raise ValueError(
            f"initial population size {len(init_pop)} != pop_size {config.pop_size}"
        )


def ga_run(config: SearchConfig, bench, init_pop: InitialPopulation) -> SearchTrace:
    """Generational GA: binary tournaments, single-point crossover, per-gene
    mutation, full replacement, best-so-far kept outside the population."""
    _check_init_pop(init_pop, config)
    rng = ensure_rng(config.seed)
    evaluator = FitnessEvaluator(bench, config.budget)
    pop = [evaluator.evaluate(g) for g in init_pop.genomes]
    best = max(pop, key=lambda ind: ind.fitness)
    fits = [ind.fitness for ind in pop]
    rows = [_stats_row(0, evaluator.count, fits, best.fitness)]
    generation = 0
    while evaluator.count + config.pop_size <= config.max_evaluations:
        generation += 1
        children = []
        for _ in range(config.pop_size):
            parent_1 = binary_tournament(pop, rng)
            parent_2 = binary_tournament(pop, rng)
            children.append(
                single_point_crossover(parent_1.genome, parent_2.genome, config.cx_p, rng)
            )
        children = [mutate_genome(g, config.mut_p, config.ind_pb, rng) for g in children]
        pop = [evaluator.evaluate(g) for g in children]
        candidate = max(pop, key=lambda ind: ind.fitness)
        if candidate.fitness > best.fitness:
            best = candidate
        fits = [ind.fitness for ind in pop]
        rows.append(_stats_row(generation, evaluator.count, fits, best.fitness))
    return _finalize(rows, best, config, bench)


def ea_run(config: SearchConfig, bench, init_pop: InitialPopulation) -> SearchTrace:
    """(mu+lambda) EA with mu = lambda = pop_size: offspring sampled uniformly
    with replacement, mutated, pooled with the parents, and the top mu kept
    (rank ties broken in favor of the older individual)."""
    _check_init_pop(init_pop, config)
    rng = ensure_rng(config.seed)
    evaluator = FitnessEvaluator(bench, config.budget)
    mu = config.pop_size
    pop = [evaluator.evaluate(g) for g in init_pop.genomes]
    pop.sort(key=lambda ind: (-ind.fitness, ind.birth_index))
    best_so_far = pop[0].fitness
    fits = [ind.fitness for ind in pop]
    rows = [_stats_row(0, evaluator.count, fits, best_so_far)]
    generation = 0
    while evaluator.count + mu <= config.max_evaluations:
        generation += 1
        picks = rng.integers(0, mu, size=mu)
        offspring_genomes = [
            mutate_genome(pop[int(i)].genome, config.mut_p, config.ind_pb, rng)
            for i in picks
        ]
        offspring = [evaluator.evaluate(g) for g in offspring_genomes]
        pool = pop + offspring
        pool.sort(key=lambda ind: (-ind.fitness, ind.birth_index))
        pop = pool[:mu]
        best_so_far = max(best_so_far, pop[0].fitness)
        fits = [ind.fitness for ind in pop]
        rows.append(_stats_row(generation, evaluator.count, fits, best_so_far))
    return _finalize(rows, pop[0], config, bench)


def ae_run(config: SearchConfig, bench, init_pop: InitialPopulation) -> SearchTrace:
    """Aging evolution: k-tournament parent selection, two-step cell mutation,
    and steady-state replacement of the oldest individual."""
    _check_init_pop(init_pop, config)
    if config.tournament_k > config.pop_size:
        raise ValueError(
            f"tournament size {config.tournament_k} exceeds population {config.pop_size}"
        )
    rng = ensure_rng(config.seed)
    evaluator = FitnessEvaluator(bench, config.budget)
    queue = deque(evaluator.evaluate(g) for g in init_pop.genomes)
    best = max(queue, key=lambda ind: ind.fitness)
    fits = [ind.fitness for ind in queue]
    rows = [_stats_row(0, evaluator.count, fits, best.fitness)]
    step = 0
    while evaluator.count + 1 <= config.max_evaluations:
        step += 1
        picks = rng.choice(len(queue), size=config.tournament_k, replace=False)
        contenders = [queue[int(i)] for i in picks]
        winner = max(contenders, key=lambda ind: ind.fitness)
        # Mutate the persistent frame genotype: edges pruned from the decoded
        # cell stay in the genome and may combine with later toggles.
        child_genome, _ = _ae_mutate_genome(winner.genome, rng)
        child = evaluator.evaluate(child_genome)
        if child.fitness > best.fitness:
            best = child
        queue.append(child)
        queue.popleft()
        fits = [ind.fitness for ind in queue]
        rows.append(_stats_row(step, evaluator.count, fits, best.fitness))
    return _finalize(rows, best, config, bench)


def rs_run(config: SearchConfig, bench) -> SearchTrace:
    """Random search baseline: independent uniform valid samples."""
    rng = ensure_rng(config.seed)
    evaluator = FitnessEvaluator(bench, config.budget)
    best = None
    rows = []
    while evaluator.count + 1 <= config.max_evaluations:
        genome, _ = sample_valid_genome(rng)
        individual = evaluator.evaluate(genome)
        if best is None or individual.fitness > best.fitness:
            best = individual
        rows.append(
            _stats_row(
                evaluator.count - 1,
                evaluator.count,
                [individual.fitness],
                best.fitness,
            )
        )
    return _finalize(rows, best, config, bench)


def run_search(config: SearchConfig, bench, init_pop: InitialPopulation | None = None) -> SearchTrace:
    if config.algo == RS:
        return rs_run(config, bench)
    if init_pop is None:
        raise ValueError(f"{config.algo} requires an initial population")
    if config.algo == GA:
        return ga_run(config, bench, init_pop)
    if config.algo == EA:
        return ea_run(config, bench, init_pop)
    if config.algo == AE:
        return ae_run(config, bench, init_pop)
    raise ValueError(f"unknown algorithm {config.algo!r}")
