"""Feed-forward DAG cells: validity rules, genome codec, and feature encodings.

A cell is a small acyclic graph with a fixed input node, a fixed output node,
and up to five intermediate operation nodes.  Cells are scored against a
tabular benchmark, so everything here is pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INPUT = "input"
OUTPUT = "output"
CONV3X3 = "conv3x3"
CONV1X1 = "conv1x1"
MAXPOOL3X3 = "maxpool3x3"

INTERMEDIATE_OPS = (CONV3X3, CONV1X1, MAXPOOL3X3)

# Numeric codes used inside feature vectors; 0 is reserved for absent slots.
OP_CODES = {CONV3X3: 1, CONV1X1: 2, MAXPOOL3X3: 3}

# Round-robin order used by the categorical mutation operator.
OP_CYCLE = {CONV3X3: CONV1X1, CONV1X1: MAXPOOL3X3, MAXPOOL3X3: CONV3X3}

MAX_NODES = 7
MAX_EDGES = 9
NUM_OP_SLOTS = 5
NUM_EDGE_BITS = 21
GENOME_LENGTH = NUM_EDGE_BITS + NUM_OP_SLOTS

SHORT_LENGTH = 58
LONG_LENGTH = 298
EXPANDED_NODES = 17

# Upper triangle of the 7x7 frame, row-major over pairs (i, j) with i < j.
EDGE_PAIRS = tuple((i, j) for i in range(MAX_NODES) for j in range(i + 1, MAX_NODES))
EDGE_INDEX = {pair: idx for idx, pair in enumerate(EDGE_PAIRS)}

# Validity failure reasons.
NOT_UPPER_TRIANGULAR = "NOT_UPPER_TRIANGULAR"
BAD_OPERATIONS = "BAD_OPERATIONS"
NO_PATH = "NO_PATH"
TOO_MANY_EDGES = "TOO_MANY_EDGES"
TOO_MANY_NODES = "TOO_MANY_NODES"


class MalformedCellError(ValueError):
    """Structurally broken cell (wrong shapes or entry domains), as opposed to
    a well-formed cell that merely violates the search-space constraints."""


class InvalidCellError(ValueError):
    """Raised by operations whose precondition requires a valid cell."""


@dataclass(frozen=True)
class CellSpec:
    """A candidate architecture: binary adjacency plus per-node operations."""

    adjacency: tuple[tuple[int, ...], ...]
    ops: tuple[str, ...]

    @property
    def num_nodes(self) -> int:
        return len(self.ops)

    @property
    def num_edges(self) -> int:
        return sum(sum(row) for row in self.adjacency)

    def to_json_dict(self) -> dict:
        return {"adjacency": [list(row) for row in self.adjacency], "ops": list(self.ops)}


@dataclass(frozen=True)
class Genome:
    """Fixed-length search genome: 21 edge bits over the 7-slot frame plus
    5 categorical operation genes.  Always decodable; validity is a property
    of the decoded cell."""

    edge_bits: tuple[int, ...]
    op_genes: tuple[str, ...]

    def __post_init__(self):
        if len(self.edge_bits) != NUM_EDGE_BITS:
            raise ValueError(f"expected {NUM_EDGE_BITS} edge bits, got {len(self.edge_bits)}")
        if len(self.op_genes) != NUM_OP_SLOTS:
            raise ValueError(f"expected {NUM_OP_SLOTS} op genes, got {len(self.op_genes)}")
        if any(b not in (0, 1) for b in self.edge_bits):
            raise ValueError("edge bits must be 0 or 1")
        if any(op not in INTERMEDIATE_OPS for op in self.op_genes):
            raise ValueError("op genes must be intermediate operations")

    def genes(self) -> tuple:
        """Flat 26-gene view used by crossover and mutation."""
        return self.edge_bits + self.op_genes


def genome_from_genes(genes) -> Genome:
    genes = tuple(genes)
    if len(genes) != GENOME_LENGTH:
        raise ValueError(f"expected {GENOME_LENGTH} genes, got {len(genes)}")
    return Genome(tuple(int(g) for g in genes[:NUM_EDGE_BITS]), tuple(genes[NUM_EDGE_BITS:]))


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    reason: str | None = None


@dataclass(frozen=True)
class FeatureVector:
    """Numeric clustering features: flattened adjacency block, operation
    codes, and the four per-budget test accuracies."""

    kind: str  # "short" | "long"
    values: np.ndarray

    @property
    def perf_slots(self) -> np.ndarray:
        return self.values[-4:]


def cell_from_json_dict(obj: dict) -> CellSpec:
    """Parse the {"adjacency": ..., "ops": ...} wire format."""
    try:
        adjacency = tuple(tuple(int(v) for v in row) for row in obj["adjacency"])
        ops = tuple(str(op) for op in obj["ops"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedCellError(f"unparseable cell object: {exc}") from exc
    cell = CellSpec(adjacency, ops)
    _check_well_formed(cell)
    return cell


def _check_well_formed(cell: CellSpec) -> None:
    n = cell.num_nodes
    if n < 2:
        raise MalformedCellError(f"cell needs at least input and output nodes, got {n}")
    if len(cell.adjacency) != n or any(len(row) != n for row in cell.adjacency):
        raise MalformedCellError("adjacency matrix dimensions do not match the op list")
    for row in cell.adjacency:
        for v in row:
            if v not in (0, 1):
                raise MalformedCellError(f"adjacency entries must be 0 or 1, got {v!r}")


def _reachable_forward(cell: CellSpec) -> list[bool]:
    n = cell.num_nodes
    seen = [False] * n
    seen[0] = True
    stack = [0]
    adj = cell.adjacency
    while stack:
        i = stack.pop()
        row = adj[i]
        for j in range(n):
            if row[j] and not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def _reachable_backward(cell: CellSpec) -> list[bool]:
    n = cell.num_nodes
    seen = [False] * n
    seen[n - 1] = True
    stack = [n - 1]
    adj = cell.adjacency
    while stack:
        j = stack.pop()
        for i in range(n):
            if adj[i][j] and not seen[i]:
                seen[i] = True
                stack.append(i)
    return seen


_DISCONNECTED_STUB = CellSpec(((0, 0), (0, 0)), (INPUT, OUTPUT))


def prune(cell: CellSpec) -> CellSpec:
    """Restrict the cell to nodes lying on some input-to-output path.

    Input and output are always retained; when they are not connected the
    result is a two-node edgeless stub, which validate() reports as invalid.
    Idempotent, and preserves the relative order of surviving nodes.
    """
    _check_well_formed(cell)
    fwd = _reachable_forward(cell)
    if not fwd[cell.num_nodes - 1]:
        return _DISCONNECTED_STUB
    bwd = _reachable_backward(cell)
    keep = [v for v in range(cell.num_nodes) if fwd[v] and bwd[v]]
    if len(keep) == cell.num_nodes:
        return cell
    adjacency = tuple(tuple(cell.adjacency[i][j] for j in keep) for i in keep)
    ops = tuple(cell.ops[i] for i in keep)
    return CellSpec(adjacency, ops)


def validate(cell: CellSpec) -> ValidityReport:
    """Check the search-space constraints on the pruned cell.

    Malformed input (non-square matrix, entries outside {0, 1}) raises
    MalformedCellError instead of producing a report.
    """
    _check_well_formed(cell)
    n = cell.num_nodes
    for i in range(n):
        for j in range(i + 1):
            if cell.adjacency[i][j]:
                return ValidityReport(False, NOT_UPPER_TRIANGULAR)
    if cell.ops[0] != INPUT or cell.ops[n - 1] != OUTPUT:
        return ValidityReport(False, BAD_OPERATIONS)
    for op in cell.ops[1:-1]:
        if op not in INTERMEDIATE_OPS:
            return ValidityReport(False, BAD_OPERATIONS)
    if not _reachable_forward(cell)[n - 1]:
        return ValidityReport(False, NO_PATH)
    pruned = prune(cell)
    if pruned.num_nodes > MAX_NODES:
        return ValidityReport(False, TOO_MANY_NODES)
    if pruned.num_edges > MAX_EDGES:
        return ValidityReport(False, TOO_MANY_EDGES)
    return ValidityReport(True, None)


def genome_frame_cell(genome: Genome) -> CellSpec:
    """Render the genome as its full 7-node frame cell, without pruning.
    This is a lossless serialization form: embed_genome inverts it."""
    adjacency = [[0] * MAX_NODES for _ in range(MAX_NODES)]
    for bit, (i, j) in zip(genome.edge_bits, EDGE_PAIRS):
        if bit:
            adjacency[i][j] = 1
    ops = (INPUT,) + genome.op_genes + (OUTPUT,)
    return CellSpec(tuple(tuple(row) for row in adjacency), ops)


def genome_to_cell(genome: Genome) -> CellSpec:
    """Decode the 7-slot frame and prune.  Total; the result may be invalid."""
    return prune(genome_frame_cell(genome))


def _frame_slots(cell: CellSpec) -> list[int]:
    """Slot of each node in the 7-slot frame: input -> 0, intermediate i -> i,
    output -> 6."""
    n = cell.num_nodes
    return [i for i in range(n - 1)] + [MAX_NODES - 1]


def embed_genome(cell: CellSpec) -> Genome:
    """Transcribe a well-formed cell into the 7-slot frame without checking
    search-space validity.  Unused op slots get a deterministic conv3x3
    filler; unused edge bits stay 0."""
    _check_well_formed(cell)
    n = cell.num_nodes
    if n > MAX_NODES:
        raise MalformedCellError(f"cannot embed {n} nodes into a {MAX_NODES}-slot frame")
    slots = _frame_slots(cell)
    bits = [0] * NUM_EDGE_BITS
    for i in range(n):
        for j in range(i + 1, n):
            if cell.adjacency[i][j]:
                bits[EDGE_INDEX[(slots[i], slots[j])]] = 1
    op_genes = [CONV3X3] * NUM_OP_SLOTS
    for i in range(1, n - 1):
        op_genes[slots[i] - 1] = cell.ops[i]
    return Genome(tuple(bits), tuple(op_genes))


def cell_to_genome(cell: CellSpec) -> Genome:
    """Embed a valid cell into the genome frame; decoding the result and
    pruning reproduces prune(cell)."""
    report = validate(cell)
    if not report.valid:
        raise InvalidCellError(f"cannot encode invalid cell ({report.reason})")
    return embed_genome(cell)


def _check_perfs(perfs) -> np.ndarray:
    perfs = np.asarray(perfs, dtype=float)
    if perfs.shape != (4,):
        raise ValueError(f"expected 4 test accuracies, got shape {perfs.shape}")
    if np.any(perfs < 0.0) or np.any(perfs > 1.0):
        raise ValueError(f"test accuracies must lie in [0, 1], got {perfs}")
    return perfs


def _op_code_block(pruned: CellSpec) -> list[int]:
    codes = [0] * NUM_OP_SLOTS
    for i, op in enumerate(pruned.ops[1:-1]):
        codes[i] = OP_CODES[op]
    return codes


def encode_short(cell: CellSpec, perfs) -> FeatureVector:
    """58-entry feature vector: the pruned adjacency zero-padded into the
    top-left of a 7x7 matrix (row-major), 5 op codes, 4 test accuracies."""
    perfs = _check_perfs(perfs)
    report = validate(cell)
    if not report.valid:
        raise InvalidCellError(f"cannot encode invalid cell ({report.reason})")
    pruned = prune(cell)
    n = pruned.num_nodes
    padded = np.zeros((MAX_NODES, MAX_NODES))
    for i in range(n):
        for j in range(n):
            padded[i, j] = pruned.adjacency[i][j]
    values = np.concatenate([padded.ravel(), _op_code_block(pruned), perfs])
    return FeatureVector("short", values)


def expanded_node_index(slot: int, op: str) -> int:
    """Index of an (op-slot, channel) pair in the 17-node expanded graph."""
    return 1 + (slot - 1) * 3 + INTERMEDIATE_OPS.index(op)


def encode_long(cell: CellSpec, perfs) -> FeatureVector:
    """298-entry feature vector over the expanded 17-node graph.

    Node 0 is the input, node 16 the output, and nodes 1..15 are one channel
    per (op slot, operation) pair, slot-major.  Each pruned edge activates the
    expanded entry between the endpoints' active channels.
    """
    perfs = _check_perfs(perfs)
    report = validate(cell)
    if not report.valid:
        raise InvalidCellError(f"cannot encode invalid cell ({report.reason})")
    pruned = prune(cell)
    n = pruned.num_nodes
    slots = _frame_slots(pruned)

    def node_index(i: int) -> int:
        if i == 0:
            return 0
        if i == n - 1:
            return EXPANDED_NODES - 1
        return expanded_node_index(slots[i], pruned.ops[i])

    expanded = np.zeros((EXPANDED_NODES, EXPANDED_NODES))
    for i in range(n):
        for j in range(i + 1, n):
            if pruned.adjacency[i][j]:
                expanded[node_index(i), node_index(j)] = 1.0
    values = np.concatenate([expanded.ravel(), _op_code_block(pruned), perfs])
    return FeatureVector("long", values)
