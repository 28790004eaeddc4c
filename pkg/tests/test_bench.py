import json

import numpy as np
import pytest

from conftest import chain_cell, dense_seven_cell, optimal_cell

from nasinit.bench import (
    BUDGETS,
    BenchmarkFormatError,
    NotInBenchmarkError,
    SurrogateBenchmark,
    canonical_key,
    encode_matrix,
    load_table,
    performance_tail,
)
from nasinit.cells import (
    CONV1X1,
    CONV3X3,
    CellSpec,
    INPUT,
    InvalidCellError,
    OUTPUT,
    prune,
)
from nasinit.sampling import sample_uniform, sample_valid_genome


def two_node():
    return CellSpec(((0, 1), (0, 0)), (INPUT, OUTPUT))


def record_for(cell, base=0.5):
    metrics = {}
    for i, budget in enumerate(BUDGETS):
        v = min(base + 0.01 * i, 0.99)
        metrics[str(budget)] = {"train": min(v + 0.005, 1.0), "valid": v, "test": max(v - 0.005, 0.0)}
    return {**cell.to_json_dict(), "metrics": metrics}


def write_lines(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


class TestCanonicalKey:
    def test_two_node_format(self):
        assert canonical_key(two_node()) == "0100|"

    def test_three_node_format(self):
        cell = CellSpec(((0, 1, 0), (0, 0, 1), (0, 0, 0)), (INPUT, CONV1X1, OUTPUT))
        assert canonical_key(cell) == "010001000|2"

    def test_isolated_node_same_key(self):
        padded = CellSpec(
            ((0, 1, 0), (0, 0, 0), (0, 0, 0)),
            (INPUT, CONV3X3, OUTPUT),
        )
        # node 1 is isolated once (0,2) is the only live route; build it so the
        # pruned cell equals the plain two-node cell
        padded = CellSpec(
            ((0, 0, 1), (0, 0, 0), (0, 0, 0)),
            (INPUT, CONV3X3, OUTPUT),
        )
        assert canonical_key(padded) == canonical_key(two_node())

    def test_key_of_pruned_equals_key_of_original(self, rng):
        for _ in range(50):
            _, cell = sample_valid_genome(rng)
            assert canonical_key(prune(cell)) == canonical_key(cell)

    def test_collision_iff_equal_pruned_cells(self, rng):
        cells = [sample_valid_genome(rng)[1] for _ in range(100)]
        keys = [canonical_key(c) for c in cells]
        for i in range(len(cells)):
            for j in range(i + 1, len(cells)):
                assert (keys[i] == keys[j]) == (prune(cells[i]) == prune(cells[j]))

    def test_invalid_cell_rejected(self):
        with pytest.raises(InvalidCellError):
            canonical_key(CellSpec(((0, 0), (0, 0)), (INPUT, OUTPUT)))


class TestLoadTable:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load_table(path).count == 0

    def test_three_line_round_trip(self, tmp_path):
        cells = [two_node(), chain_cell(3), chain_cell(4)]
        rows = [record_for(c, base=0.4 + 0.1 * i) for i, c in enumerate(cells)]
        path = tmp_path / "three.jsonl"
        write_lines(path, rows)
        table = load_table(path)
        assert table.count == 3
        for row, cell in zip(rows, cells):
            for budget in BUDGETS:
                for metric in ("train", "valid", "test"):
                    assert table.query(cell, budget, metric) == row["metrics"][str(budget)][metric]

    def test_fifty_line_fixture_round_trip(self, tmp_path, rng):
        cells, seen = [], set()
        while len(cells) < 50:
            _, cell = sample_valid_genome(rng)
            key = canonical_key(cell)
            if key not in seen:
                seen.add(key)
                cells.append(cell)
        rows = [record_for(c, base=float(rng.uniform(0.1, 0.9))) for c in cells]
        path = tmp_path / "fifty.jsonl"
        write_lines(path, rows)
        table = load_table(path)
        assert table.count == 50
        for row, cell in zip(rows, cells):
            for budget in BUDGETS:
                for metric in ("train", "valid", "test"):
                    assert table.query(cell, budget, metric) == row["metrics"][str(budget)][metric]

    def test_duplicate_via_two_serializations(self, tmp_path):
        plain = two_node()
        padded = CellSpec(
            ((0, 0, 1), (0, 0, 0), (0, 0, 0)), (INPUT, CONV3X3, OUTPUT)
        )
        path = tmp_path / "dup.jsonl"
        write_lines(path, [record_for(plain), record_for(padded)])
        with pytest.raises(BenchmarkFormatError) as err:
            load_table(path)
        assert canonical_key(plain) in str(err.value)
        assert "line 2" in str(err.value)

    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text(json.dumps(record_for(two_node())) + "\n{not json\n")
        with pytest.raises(BenchmarkFormatError, match="line 2"):
            load_table(path)

    def test_missing_budget(self, tmp_path):
        row = record_for(two_node())
        del row["metrics"]["36"]
        path = tmp_path / "missing.jsonl"
        write_lines(path, [row])
        with pytest.raises(BenchmarkFormatError, match="36"):
            load_table(path)

    def test_out_of_range_accuracy(self, tmp_path):
        row = record_for(two_node())
        row["metrics"]["4"]["valid"] = 1.2
        path = tmp_path / "range.jsonl"
        write_lines(path, [row])
        with pytest.raises(BenchmarkFormatError, match="line 1"):
            load_table(path)


class TestQuery:
    def test_exact_lookup(self, tmp_path):
        row = record_for(two_node())
        row["metrics"]["36"]["valid"] = 0.91
        path = tmp_path / "one.jsonl"
        write_lines(path, [row])
        table = load_table(path)
        assert table.query(two_node(), 36, "valid") == 0.91
        # repeated queries are pure
        assert table.query(two_node(), 36, "valid") == 0.91

    def test_not_in_benchmark(self, tmp_path):
        path = tmp_path / "one.jsonl"
        write_lines(path, [record_for(two_node())])
        table = load_table(path)
        with pytest.raises(NotInBenchmarkError):
            table.query(chain_cell(3), 36, "valid")

    def test_unknown_budget_and_metric(self, tmp_path):
        path = tmp_path / "one.jsonl"
        write_lines(path, [record_for(two_node())])
        table = load_table(path)
        with pytest.raises(ValueError):
            table.query(two_node(), 20, "valid")
        with pytest.raises(ValueError):
            table.query(two_node(), 36, "accuracy")


class TestSurrogate:
    def setup_method(self):
        self.bench = SurrogateBenchmark()

    def test_two_node_values(self):
        assert self.bench.query(two_node(), 108, "valid") == pytest.approx(1 / 18)

    def test_optimal_cell(self):
        cell = optimal_cell()
        assert self.bench.query(cell, 36, "valid") == pytest.approx(0.9)
        assert self.bench.query(cell, 108, "valid") == pytest.approx(1.0)

    def test_three_node_chain(self):
        cell = chain_cell(3)  # E=2, C=1
        assert self.bench.query(cell, 12, "valid") == pytest.approx(0.211111 * (0.85 + 0.15 * 12 / 108), abs=1e-6)
        assert self.bench.query(cell, 12, "valid") == pytest.approx(0.182963, abs=1e-6)

    def test_metric_relationships(self):
        cell = chain_cell(4)
        for budget in BUDGETS:
            valid = self.bench.query(cell, budget, "valid")
            assert self.bench.query(cell, budget, "test") == pytest.approx(max(valid - 0.01, 0.0))
            assert self.bench.query(cell, budget, "train") == pytest.approx(min(valid + 0.02, 1.0))

    def test_monotone_in_budget(self):
        cell = chain_cell(5)
        values = [self.bench.query(cell, b, "valid") for b in BUDGETS]
        assert values == sorted(values)

    def test_monotone_in_conv_count(self):
        values = [
            self.bench.query(chain_cell(4, op), 36, "valid")
            for op in (CONV1X1, CONV3X3)
        ]
        assert values[0] < values[1]

    def test_monotone_in_edges(self):
        sparse = dense_seven_cell()
        adjacency = [list(row) for row in sparse.adjacency]
        adjacency[0][6] = 0  # drop one edge
        fewer = CellSpec(tuple(map(tuple, adjacency)), sparse.ops)
        assert self.bench.query(fewer, 36, "valid") < self.bench.query(sparse, 36, "valid")

    def test_invalid_cell_scores_zero(self):
        stub = CellSpec(((0, 0), (0, 0)), (INPUT, OUTPUT))
        for metric in ("train", "valid", "test"):
            assert self.bench.query(stub, 36, metric) == 0.0

    def test_bad_budget(self):
        with pytest.raises(ValueError):
            self.bench.query(two_node(), 50, "valid")


class TestEncodeMatrix:
    def test_shapes_and_tails(self):
        bench = SurrogateBenchmark()
        samples = sample_uniform(20, 3)
        short = encode_matrix(samples.cells, bench, "short")
        long = encode_matrix(samples.cells, bench, "long")
        assert short.shape == (20, 58)
        assert long.shape == (20, 298)
        for row, cell in zip(short, samples.cells):
            assert np.allclose(row[-4:], performance_tail(bench, cell))

    def test_unknown_encoding(self):
        with pytest.raises(ValueError):
            encode_matrix([], SurrogateBenchmark(), "medium")
