import numpy as np
import pytest

from conftest import three_blobs
from oracles import (
    adjusted_rand_index,
    dbscan_reference,
    exhaustive_kmeans,
    partition_signature,
)

from nasinit.clustering import DbscanParams, dbscan_fit, kmeans_fit


class TestKMeans:
    def test_one_dimensional_example_matches_exhaustive_search(self):
        X = np.array([[0.0], [1.0], [10.0], [11.0]])
        model, assignment = kmeans_fit(X, 2, n_init=10, rng=0)
        best_inertia, _, best_centers = exhaustive_kmeans(X, 2)
        assert model.inertia == pytest.approx(best_inertia)
        assert model.inertia == pytest.approx(1.0)
        assert sorted(model.centers.ravel().tolist()) == [0.5, 10.5]
        assert assignment.n_clusters == 2

    def test_k_equals_n(self, rng):
        X = rng.normal(size=(6, 2))
        model, assignment = kmeans_fit(X, 6, n_init=5, rng=1)
        assert model.inertia == pytest.approx(0.0, abs=1e-12)
        assert assignment.n_clusters == 6

    def test_k_out_of_range(self, rng):
        X = rng.normal(size=(4, 2))
        with pytest.raises(ValueError):
            kmeans_fit(X, 5, rng=0)
        with pytest.raises(ValueError):
            kmeans_fit(X, 0, rng=0)

    def test_blob_recovery(self, rng):
        for seed in range(5):
            X, truth, _ = three_blobs(np.random.default_rng(seed), per_blob=30)
            _, assignment = kmeans_fit(X, 3, n_init=10, rng=seed)
            assert adjusted_rand_index(assignment.labels, truth) == pytest.approx(1.0)

    def test_inertia_traces_non_increasing_and_consistent(self, rng):
        X = rng.normal(size=(40, 3))
        model, assignment = kmeans_fit(X, 4, n_init=20, rng=2)
        for trace in model.inertia_traces:
            diffs = np.diff(trace)
            assert np.all(diffs <= 1e-9)
        recomputed = sum(
            np.linalg.norm(x - model.centers[label]) ** 2
            for x, label in zip(X, assignment.labels)
        )
        assert model.inertia == pytest.approx(recomputed, abs=1e-9)

    def test_lowest_inertia_restart_wins(self, rng):
        X = rng.normal(size=(25, 2))
        model, _ = kmeans_fit(X, 3, n_init=15, rng=3)
        finals = [trace[-1] for trace in model.inertia_traces]
        assert model.inertia == min(finals)
        assert model.best_restart == int(np.argmin(finals))

    def test_seeded_determinism(self, rng):
        X = rng.normal(size=(30, 2))
        a, _ = kmeans_fit(X, 3, n_init=5, rng=7)
        b, _ = kmeans_fit(X, 3, n_init=5, rng=7)
        assert np.array_equal(a.centers, b.centers)
        assert a.inertia == b.inertia


class TestDbscan:
    def test_two_separated_groups(self):
        X = np.vstack(
            [
                [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]],
                [[10.0, 10.0], [10.1, 10.0], [10.0, 10.1]],
            ]
        )
        assignment = dbscan_fit(X, DbscanParams(eps=0.3, min_samples=2))
        assert assignment.n_clusters == 2
        assert -1 not in assignment.labels

    def test_isolated_point_is_noise(self):
        assignment = dbscan_fit(np.array([[0.0, 0.0]]), DbscanParams(0.3, 2))
        assert assignment.labels.tolist() == [-1]

    def test_matches_reference_implementation(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            X = rng.uniform(0, 3, size=(50, 2))
            mine = dbscan_fit(X, DbscanParams(0.35, 3)).labels
            ref = dbscan_reference(X, 0.35, 3)
            assert (mine == -1).sum() == (ref == -1).sum()
            assert adjusted_rand_index(mine[mine != -1], ref[mine != -1]) == pytest.approx(1.0)

    def test_order_invariance_up_to_relabeling(self):
        rng = np.random.default_rng(5)
        X, _, _ = three_blobs(rng, per_blob=20, spread=0.05)
        base = dbscan_fit(X, DbscanParams(0.3, 3)).labels
        perm = rng.permutation(len(X))
        shuffled = dbscan_fit(X[perm], DbscanParams(0.3, 3)).labels
        unshuffled = np.empty_like(shuffled)
        unshuffled[perm] = shuffled
        assert partition_signature(base) == partition_signature(unshuffled)

    def test_labels_dense_from_first_visited_core(self):
        X = np.array([[0.0], [0.05], [5.0], [5.05], [9.0]])
        labels = dbscan_fit(X, DbscanParams(0.2, 2)).labels
        assert labels.tolist() == [0, 0, 1, 1, -1]

    def test_param_validation(self):
        with pytest.raises(ValueError):
            DbscanParams(eps=0.0, min_samples=2)
        with pytest.raises(ValueError):
            DbscanParams(eps=0.5, min_samples=0)
