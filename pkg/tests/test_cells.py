import numpy as np
import pytest

from conftest import chain_cell, dense_seven_cell
from oracles import brute_force_valid, on_path_nodes

from nasinit.cells import (
    BAD_OPERATIONS,
    CONV1X1,
    CONV3X3,
    CellSpec,
    EDGE_INDEX,
    EDGE_PAIRS,
    Genome,
    INPUT,
    InvalidCellError,
    MAXPOOL3X3,
    MalformedCellError,
    NO_PATH,
    NOT_UPPER_TRIANGULAR,
    OUTPUT,
    TOO_MANY_EDGES,
    cell_from_json_dict,
    cell_to_genome,
    encode_long,
    encode_short,
    expanded_node_index,
    genome_frame_cell,
    genome_to_cell,
    prune,
    validate,
)
from nasinit.sampling import random_genome, sample_valid_genome


def two_node_cell():
    return CellSpec(((0, 1), (0, 0)), (INPUT, OUTPUT))


class TestValidate:
    def test_seven_nodes_nine_edges_is_valid(self):
        report = validate(dense_seven_cell())
        assert report.valid and report.reason is None

    def test_ten_surviving_edges_rejected(self):
        cell = dense_seven_cell()
        adjacency = [list(row) for row in cell.adjacency]
        adjacency[2][4] = 1  # tenth edge between on-path nodes
        report = validate(CellSpec(tuple(map(tuple, adjacency)), cell.ops))
        assert not report.valid
        assert report.reason == TOO_MANY_EDGES

    def test_prunable_node_does_not_invalidate(self):
        # node 2 has no route to the output; it prunes away
        adjacency = (
            (0, 1, 1, 0),
            (0, 0, 0, 1),
            (0, 0, 0, 0),
            (0, 0, 0, 0),
        )
        cell = CellSpec(adjacency, (INPUT, CONV3X3, CONV1X1, OUTPUT))
        assert validate(cell).valid
        assert prune(cell).num_nodes == 3
        assert sorted(on_path_nodes(adjacency)) == [0, 1, 3]

    def test_disconnected_reports_no_path(self):
        cell = CellSpec(((0, 0), (0, 0)), (INPUT, OUTPUT))
        assert validate(cell).reason == NO_PATH

    def test_lower_triangle_entry(self):
        cell = CellSpec(((0, 1), (1, 0)), (INPUT, OUTPUT))
        assert validate(cell).reason == NOT_UPPER_TRIANGULAR

    def test_bad_operations(self):
        cell = CellSpec(((0, 1), (0, 0)), (OUTPUT, INPUT))
        assert validate(cell).reason == BAD_OPERATIONS
        cell = CellSpec(
            ((0, 1, 1), (0, 0, 1), (0, 0, 0)), (INPUT, "projection", OUTPUT)
        )
        assert validate(cell).reason == BAD_OPERATIONS

    def test_malformed_is_an_error_not_a_report(self):
        with pytest.raises(MalformedCellError):
            validate(CellSpec(((0, 1),), (INPUT, OUTPUT)))
        with pytest.raises(MalformedCellError):
            validate(CellSpec(((0, 2), (0, 0)), (INPUT, OUTPUT)))
        with pytest.raises(MalformedCellError):
            cell_from_json_dict({"adjacency": [[0, 1]], "ops": ["input"]})

    def test_agrees_with_brute_force_on_random_genomes(self, rng):
        for _ in range(10_000):
            genome = random_genome(rng)
            cell = genome_frame_cell(genome)
            assert validate(cell).valid == brute_force_valid(cell.adjacency, cell.ops)


class TestPrune:
    def test_isolated_node_removed(self):
        adjacency = (
            (0, 1, 0, 0),
            (0, 0, 0, 1),
            (0, 0, 0, 0),
            (0, 0, 0, 0),
        )
        cell = CellSpec(adjacency, (INPUT, CONV3X3, CONV1X1, OUTPUT))
        pruned = prune(cell)
        assert pruned.ops == (INPUT, CONV3X3, OUTPUT)
        assert pruned.adjacency == ((0, 1, 0), (0, 0, 1), (0, 0, 0))

    def test_fully_connected_is_fixpoint(self):
        cell = dense_seven_cell()
        assert prune(cell) == cell

    def test_matches_reachability_oracle(self, rng):
        for _ in range(200):
            genome = random_genome(rng)
            cell = genome_frame_cell(genome)
            pruned = prune(cell)
            kept = sorted(on_path_nodes(cell.adjacency))
            if 6 not in kept or 0 not in kept:
                assert pruned.num_nodes == 2 and pruned.num_edges == 0
            else:
                assert pruned.ops == tuple(cell.ops[i] for i in kept)

    def test_idempotent(self, rng):
        for _ in range(200):
            cell = genome_to_cell(random_genome(rng))
            assert prune(cell) == cell

    def test_no_path_yields_invalid_stub(self):
        cell = CellSpec(
            ((0, 1, 0), (0, 0, 0), (0, 0, 0)), (INPUT, CONV3X3, OUTPUT)
        )
        stub = prune(cell)
        assert stub.num_nodes == 2 and stub.num_edges == 0
        assert not validate(stub).valid


class TestGenomeCodec:
    def test_empty_genome_decodes_to_invalid_stub(self):
        genome = Genome((0,) * 21, (CONV3X3,) * 5)
        cell = genome_to_cell(genome)
        assert cell.num_nodes == 2
        assert not validate(cell).valid

    def test_single_input_output_bit(self):
        bits = [0] * 21
        bits[EDGE_INDEX[(0, 6)]] = 1
        cell = genome_to_cell(Genome(tuple(bits), (CONV3X3,) * 5))
        assert cell == two_node_cell()
        assert validate(cell).valid

    def test_two_node_cell_embedding(self):
        genome = cell_to_genome(two_node_cell())
        assert sum(genome.edge_bits) == 1
        assert genome.edge_bits[EDGE_INDEX[(0, 6)]] == 1
        assert genome.op_genes == (CONV3X3,) * 5

    def test_seven_node_cell_is_exact_transcription(self):
        cell = dense_seven_cell()
        genome = cell_to_genome(cell)
        for bit, (i, j) in zip(genome.edge_bits, EDGE_PAIRS):
            assert bit == cell.adjacency[i][j]
        assert genome.op_genes == cell.ops[1:-1]

    def test_round_trip_reproduces_pruned_cell(self, rng):
        for _ in range(100):
            _, cell = sample_valid_genome(rng)
            assert genome_to_cell(cell_to_genome(cell)) == prune(cell)

    def test_round_trip_with_prunable_nodes(self):
        adjacency = (
            (0, 1, 0, 0),
            (0, 0, 0, 1),
            (0, 0, 0, 0),
            (0, 0, 0, 0),
        )
        cell = CellSpec(adjacency, (INPUT, CONV3X3, CONV1X1, OUTPUT))
        assert genome_to_cell(cell_to_genome(cell)) == prune(cell)

    def test_invalid_cell_rejected(self):
        with pytest.raises(InvalidCellError):
            cell_to_genome(CellSpec(((0, 0), (0, 0)), (INPUT, OUTPUT)))

    def test_genome_shape_checks(self):
        with pytest.raises(ValueError):
            Genome((0,) * 20, (CONV3X3,) * 5)
        with pytest.raises(ValueError):
            Genome((0,) * 21, (INPUT,) * 5)


class TestShortEncoding:
    def test_two_node_layout(self):
        fv = encode_short(two_node_cell(), (0.1, 0.2, 0.3, 0.4))
        assert fv.values.shape == (58,)
        assert fv.values[1] == 1.0
        assert np.count_nonzero(fv.values[:49]) == 1
        assert np.all(fv.values[49:54] == 0.0)
        assert np.allclose(fv.perf_slots, [0.1, 0.2, 0.3, 0.4])

    def test_dense_cell_counts(self):
        cell = dense_seven_cell()
        fv = encode_short(cell, (0.5, 0.5, 0.5, 0.5))
        assert np.count_nonzero(fv.values[:49]) == cell.num_edges == 9
        assert np.count_nonzero(fv.values[49:54]) == 5

    def test_block_decodes_back_to_pruned_cell(self, rng):
        code_to_op = {1: CONV3X3, 2: CONV1X1, 3: MAXPOOL3X3}
        for _ in range(100):
            _, cell = sample_valid_genome(rng)
            pruned = prune(cell)
            fv = encode_short(cell, (0.0, 0.0, 0.0, 0.0))
            padded = fv.values[:49].reshape(7, 7).astype(int)
            n = pruned.num_nodes
            assert np.all(padded[n:, :] == 0) and np.all(padded[:, n:] == 0)
            assert np.array_equal(padded[:n, :n], np.array(pruned.adjacency))
            codes = [int(c) for c in fv.values[49:54]]
            ops = tuple(code_to_op[c] for c in codes if c != 0)
            assert ops == pruned.ops[1:-1]

    def test_rejects_bad_performances(self):
        with pytest.raises(ValueError):
            encode_short(two_node_cell(), (0.1, 0.2, 0.3, 1.5))
        with pytest.raises(ValueError):
            encode_short(two_node_cell(), (0.1, 0.2, 0.3))

    def test_rejects_invalid_cell(self):
        with pytest.raises(InvalidCellError):
            encode_short(CellSpec(((0, 0), (0, 0)), (INPUT, OUTPUT)), (0, 0, 0, 0))


class TestLongEncoding:
    def test_two_node_layout(self):
        fv = encode_long(two_node_cell(), (0.1, 0.2, 0.3, 0.4))
        assert fv.values.shape == (298,)
        ones = np.flatnonzero(fv.values[:289])
        assert ones.tolist() == [16]  # expanded (0, 16), row-major

    def test_three_node_conv1x1(self):
        cell = CellSpec(
            ((0, 1, 0), (0, 0, 1), (0, 0, 0)), (INPUT, CONV1X1, OUTPUT)
        )
        assert expanded_node_index(1, CONV1X1) == 2
        fv = encode_long(cell, (0, 0, 0, 0))
        ones = sorted(np.flatnonzero(fv.values[:289]).tolist())
        assert ones == [0 * 17 + 2, 2 * 17 + 16]

    def test_ones_count_equals_pruned_edges(self, rng):
        for _ in range(100):
            _, cell = sample_valid_genome(rng)
            fv = encode_long(cell, (0.0, 0.0, 0.0, 0.0))
            assert np.count_nonzero(fv.values[:289]) == prune(cell).num_edges

    def test_op_and_perf_blocks_match_short(self, rng):
        for _ in range(20):
            _, cell = sample_valid_genome(rng)
            perfs = (0.2, 0.4, 0.6, 0.8)
            short = encode_short(cell, perfs)
            long = encode_long(cell, perfs)
            assert np.array_equal(short.values[49:], long.values[289:])


class TestEncodingDomains:
    def test_binary_and_code_domains(self, rng):
        for _ in range(50):
            _, cell = sample_valid_genome(rng)
            short = encode_short(cell, (0.5, 0.5, 0.5, 0.5))
            long = encode_long(cell, (0.5, 0.5, 0.5, 0.5))
            assert set(np.unique(short.values[:49])) <= {0.0, 1.0}
            assert set(np.unique(long.values[:289])) <= {0.0, 1.0}
            assert set(np.unique(short.values[49:54])) <= {0.0, 1.0, 2.0, 3.0}

    def test_chain_cells(self):
        for n in range(2, 8):
            cell = chain_cell(n)
            assert validate(cell).valid
            assert encode_short(cell, (0, 0, 0, 0)).values.shape == (58,)
