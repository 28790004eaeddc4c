"""Tabular architecture-performance benchmark and its deterministic surrogate.

The on-disk format is JSON lines, one record per architecture:

    {"adjacency": [[...]], "ops": [...],
     "metrics": {"4": {"train": x, "valid": x, "test": x}, "12": {...},
                 "36": {...}, "108": {...}}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .cells import (
    CONV3X3,
    CellSpec,
    InvalidCellError,
    MalformedCellError,
    OP_CODES,
    cell_from_json_dict,
    encode_long,
    encode_short,
    prune,
    validate,
)

BUDGETS = (4, 12, 36, 108)
METRICS = ("train", "valid", "test")


class BenchmarkFormatError(ValueError):
    """Benchmark file violates the JSON-lines schema."""


class NotInBenchmarkError(KeyError):
    """Queried architecture is absent from the loaded table."""


def canonical_key(cell: CellSpec) -> str:
    """Serialize the pruned cell: row-major adjacency bits, then '|', then the
    intermediate op codes.  Equal pruned cells map to equal keys; isomorphic
    but differently ordered cells do not (no graph canonicalization).
    """
    report = validate(cell)
    if not report.valid:
        raise InvalidCellError(f"cannot key invalid cell ({report.reason})")
    pruned = prune(cell)
    bits = "".join(str(v) for row in pruned.adjacency for v in row)
    codes = "".join(str(OP_CODES[op]) for op in pruned.ops[1:-1])
    return bits + "|" + codes


@dataclass(frozen=True)
class MetricsRecord:
    """Per-budget train/valid/test accuracies for one architecture."""

    by_budget: Mapping[int, Mapping[str, float]]

    def get(self, budget: int, metric: str) -> float:
        if budget not in BUDGETS:
            raise ValueError(f"unknown budget {budget}, expected one of {BUDGETS}")
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
        return self.by_budget[budget][metric]


def _parse_metrics(obj, line_no: int) -> MetricsRecord:
    if not isinstance(obj, dict):
        raise BenchmarkFormatError(f"line {line_no}: 'metrics' must be an object")
    expected = {str(b) for b in BUDGETS}
    if set(obj) != expected:
        missing = expected - set(obj)
        extra = set(obj) - expected
        detail = f"missing budgets {sorted(missing)}" if missing else f"unexpected keys {sorted(extra)}"
        raise BenchmarkFormatError(f"line {line_no}: {detail}")
    by_budget = {}
    for budget in BUDGETS:
        entry = obj[str(budget)]
        if not isinstance(entry, dict) or set(entry) != set(METRICS):
            raise BenchmarkFormatError(
                f"line {line_no}: budget {budget} must carry exactly {METRICS}"
            )
        values = {}
        for metric in METRICS:
            v = float(entry[metric])
            if not 0.0 <= v <= 1.0:
                raise BenchmarkFormatError(
                    f"line {line_no}: {metric}({budget}) = {v} outside [0, 1]"
                )
            values[metric] = v
        by_budget[budget] = values
    return MetricsRecord(by_budget)


class BenchmarkTable:
    """Immutable map from canonical cell key to per-budget metrics."""

    def __init__(self, entries: Mapping[str, MetricsRecord]):
        self._entries = dict(entries)

    @property
    def count(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def keys(self):
        return self._entries.keys()

    def record(self, cell: CellSpec) -> MetricsRecord:
        key = canonical_key(cell)
        try:
            return self._entries[key]
        except KeyError:
            raise NotInBenchmarkError(f"architecture {key} not in benchmark") from None

    def query(self, cell: CellSpec, budget: int, metric: str) -> float:
        return self.record(cell).get(budget, metric)


def load_table(path) -> BenchmarkTable:
    """Load a JSON-lines benchmark file; duplicate architectures (same pruned
    cell under canonical_key) are rejected."""
    entries: dict[str, MetricsRecord] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BenchmarkFormatError(f"line {line_no}: invalid JSON ({exc})") from exc
            if "metrics" not in obj:
                raise BenchmarkFormatError(f"line {line_no}: missing 'metrics'")
            try:
                cell = cell_from_json_dict(obj)
                key = canonical_key(cell)
            except (MalformedCellError, InvalidCellError) as exc:
                raise BenchmarkFormatError(f"line {line_no}: {exc}") from exc
            if key in entries:
                raise BenchmarkFormatError(f"line {line_no}: duplicate architecture {key}")
            entries[key] = _parse_metrics(obj["metrics"], line_no)
    return BenchmarkTable(entries)


class SurrogateBenchmark:
    """Deterministic stand-in with the same query interface as BenchmarkTable.

    Fitness grows with the pruned edge count E and the number of conv3x3
    intermediates C: f = 0.5*(E/9) + 0.5*(C/5), so the known optimum f = 1
    sits at E = 9, C = 5.  Invalid cells score 0.0 on every metric, the
    sentinel used by search for invalid offspring.
    """

    def query(self, cell: CellSpec, budget: int, metric: str) -> float:
        if budget not in BUDGETS:
            raise ValueError(f"unknown budget {budget}, expected one of {BUDGETS}")
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
        if not validate(cell).valid:
            return 0.0
        pruned = prune(cell)
        edges = pruned.num_edges
        convs = sum(1 for op in pruned.ops[1:-1] if op == CONV3X3)
        f = 0.5 * (edges / 9.0) + 0.5 * (convs / 5.0)
        valid_acc = f * (0.85 + 0.15 * budget / 108.0)
        if metric == "valid":
            return valid_acc
        if metric == "test":
            return max(valid_acc - 0.01, 0.0)
        return min(valid_acc + 0.02, 1.0)


def performance_tail(bench, cell: CellSpec) -> tuple[float, float, float, float]:
    """The four per-budget test accuracies used as feature-vector tails."""
    return tuple(bench.query(cell, b, "test") for b in BUDGETS)


def encode_matrix(cells, bench, encoding: str):
    """Stack the feature vectors of many cells, with performances joined from
    the benchmark.  Returns an (n, 58) or (n, 298) float matrix."""
    if encoding == "short":
        encode = encode_short
    elif encoding == "long":
        encode = encode_long
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    return np.stack([encode(cell, performance_tail(bench, cell)).values for cell in cells])
