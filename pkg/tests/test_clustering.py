import itertools

import numpy as np
import pytest

from graphflex import clustering, synth
from graphflex.clustering import (
    ClusterModel,
    consistency_experiment,
    infer_community,
    infer_many,
    kmeans_fit,
    load_model,
    misclassified_fraction,
    save_model,
    spectral_fit,
)
from graphflex.graph import build_graph
from graphflex.metrics import nmi


def brute_force_misclassified(true_labels, pred_labels, k):
    """Oracle: minimize mismatches over every label permutation."""
    a = np.asarray(true_labels)
    b = np.asarray(pred_labels)
    best = 1.0
    for perm in itertools.permutations(range(k)):
        mapped = np.array([perm[x] for x in b])
        best = min(best, float(np.mean(mapped != a)))
    return best


class TestKmeans:
    def test_two_separated_pairs(self):
        X = np.array([[0.0], [0.1], [10.0], [10.1]])
        m = kmeans_fit(X, 2, seed=0)
        a = m.train_assignments
        assert a[0] == a[1] and a[2] == a[3] and a[0] != a[2]
        assert sorted(m.centroids.ravel().tolist()) == pytest.approx([0.05, 10.05])

    def test_k_equals_n_zero_objective(self):
        X = np.array([[0.0], [0.1], [10.0], [10.1]])
        m = kmeans_fit(X, 4, seed=0)
        assert ((X - m.centroids[m.train_assignments]) ** 2).sum() == pytest.approx(0.0)

    def test_gaussian_mixture_nmi(self):
        scores = []
        for s in range(20):
            ds = synth.gen_blobs(300, classes=3, d=8, sep=6.0, seed=s)
            m = kmeans_fit(ds.features, 3, seed=s)
            scores.append(nmi(ds.labels, m.train_assignments))
        assert np.mean(scores) >= 0.95

    def test_centroids_are_assignment_means(self, rng):
        X = rng.standard_normal((60, 4))
        m = kmeans_fit(X, 5, seed=1)
        for c in range(5):
            members = m.train_assignments == c
            assert members.any()  # every community nonempty
            np.testing.assert_allclose(m.centroids[c], X[members].mean(axis=0), atol=1e-9)

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((3, 2)), 4)

    def test_empty_cluster_repair_counted(self):
        # a duplicated centroid never wins an assignment; repair reseeds it
        X = np.array([[0.0], [0.2], [10.0], [10.2], [20.0]])
        centroids = np.array([[0.1], [0.1], [15.0]])
        assign = clustering._assign(X, centroids)
        assert not np.any(assign == 1)
        assign2, repairs = clustering._repair_empty(X, centroids.copy(), assign)
        assert repairs >= 1
        assert set(assign2.tolist()) == {0, 1, 2}


class TestSpectral:
    def test_two_disjoint_triangles(self):
        g = build_graph(6, [(0, 1, 1), (0, 2, 1), (1, 2, 1), (3, 4, 1), (3, 5, 1), (4, 5, 1)])
        X = np.arange(12, dtype=float).reshape(6, 2)
        m = spectral_fit(g, X, 2, seed=0)
        a = m.train_assignments
        assert len(set(a[:3].tolist())) == 1 and len(set(a[3:].tolist())) == 1
        assert a[0] != a[3]

    def test_complete_graph_single_community(self):
        edges = [(u, v, 1.0) for u in range(6) for v in range(u + 1, 6)]
        g = build_graph(6, edges)
        m = spectral_fit(g, np.zeros((6, 2)), 1, seed=0)
        assert set(m.train_assignments.tolist()) == {0}

    def test_dcsbm_recovery(self):
        fractions = []
        for s in range(20):
            p = synth.DcsbmParams(
                n=600, k=2, P=np.array([[0.2, 0.01], [0.01, 0.2]]), rho=1.0, seed=s
            )
            ds = synth.gen_dcsbm(p)
            m = spectral_fit(ds.graph, ds.features, 2, seed=s)
            fractions.append(misclassified_fraction(ds.labels, m.train_assignments))
        assert np.mean(fractions) <= 0.05

    def test_isolated_nodes_allowed(self):
        g = build_graph(4, [(0, 1, 1.0)])  # nodes 2, 3 isolated
        m = spectral_fit(g, np.arange(8, dtype=float).reshape(4, 2), 2, seed=0)
        assert m.train_assignments.shape == (4,)

    def test_lanczos_path_above_dense_limit(self):
        ds = synth.gen_blobs(2100, classes=2, d=4, sep=10.0, seed=0)
        from graphflex.learners import learn_knn

        g = build_graph(2100, learn_knn(ds.features, 5))
        m = spectral_fit(g, ds.features, 2, seed=0)
        assert misclassified_fraction(ds.labels, m.train_assignments) <= 0.02


class TestInference:
    def test_exact_centroid(self):
        m = ClusterModel("kmeans", 3, np.array([[0.0], [5.0], [9.0]]), None)
        assert infer_community(m, np.array([9.0])) == 2

    def test_tie_goes_to_smaller_id(self):
        m = ClusterModel("kmeans", 2, np.array([[0.0], [2.0]]), None)
        assert infer_community(m, np.array([1.0])) == 0

    def test_dimension_mismatch(self):
        m = ClusterModel("kmeans", 2, np.zeros((2, 3)), None)
        with pytest.raises(ValueError):
            infer_community(m, np.zeros(2))

    def test_held_out_accuracy(self):
        hits = []
        for s in range(10):
            ds = synth.gen_blobs(400, classes=3, d=8, sep=6.0, seed=s)
            m = kmeans_fit(ds.features[:300], 3, seed=s)
            held_labels = ds.labels[300:]
            pred = infer_many(m, ds.features[300:])
            hits.append(1.0 - misclassified_fraction(held_labels, pred))
        assert np.mean(hits) >= 0.9

    def test_permutation_equivariance(self, rng):
        centroids = rng.standard_normal((4, 3))
        m = ClusterModel("kmeans", 4, centroids, None)
        perm = np.array([2, 0, 3, 1])
        m_perm = ClusterModel("kmeans", 4, centroids[perm], None)
        for _ in range(20):
            x = rng.standard_normal(3)
            mapped = int(np.flatnonzero(perm == infer_community(m, x))[0])
            assert infer_community(m_perm, x) == mapped


class TestMisclassifiedFraction:
    def test_matches_brute_force_small_k(self, rng):
        for k in (2, 3, 4):
            a = rng.integers(0, k, size=60)
            b = rng.integers(0, k, size=60)
            assert misclassified_fraction(a, b) == pytest.approx(
                brute_force_misclassified(a, b, k)
            )

    def test_invariant_under_relabeling(self, rng):
        a = rng.integers(0, 4, size=100)
        b = rng.integers(0, 4, size=100)
        perm = np.array([3, 0, 1, 2])
        assert misclassified_fraction(a, b) == pytest.approx(
            misclassified_fraction(a, perm[b])
        )

    def test_perfect_after_permutation(self):
        assert misclassified_fraction([0, 0, 1, 1], [1, 1, 0, 0]) == 0.0


class TestConsistencyExperiment:
    def test_low_degree_regime_stays_bad(self):
        # constant small average degree: no consistency expected
        grid = [
            synth.DcsbmParams(n=n, k=2, P=np.array([[10.0, 1.0], [1.0, 10.0]]),
                              rho=2.0 / (5.5 * n), seed=s)
            for n in (300, 600) for s in range(3)
        ]
        reports = consistency_experiment(grid)
        assert np.mean([r.misclassified_fraction for r in reports]) > 0.2

    def test_growing_degree_improves(self):
        # fixed rho: average degree grows linearly with n
        def frac(n):
            grid = [
                synth.DcsbmParams(n=n, k=2, P=np.array([[10.0, 1.0], [1.0, 10.0]]),
                                  rho=0.0036, seed=s)
                for s in range(3)
            ]
            return np.mean([r.misclassified_fraction for r in consistency_experiment(grid)])

        assert frac(1000) <= frac(250) + 0.02

    def test_report_fields(self):
        p = synth.DcsbmParams(n=200, k=2, P=np.array([[0.2, 0.02], [0.02, 0.2]]), rho=1.0, seed=0)
        (rep,) = consistency_experiment([p])
        assert rep.n == 200 and rep.lam > 0 and 0.0 <= rep.misclassified_fraction <= 1.0


class TestSerialization:
    def test_round_trip(self, tmp_path, rng):
        X = rng.standard_normal((40, 6))
        m = kmeans_fit(X, 3, seed=2)
        path = tmp_path / "model.mclu"
        save_model(path, m)
        loaded = load_model(path)
        assert loaded.method == "kmeans" and loaded.k == 3
        np.testing.assert_array_equal(loaded.centroids, m.centroids)
        assert loaded.train_assignments is None

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.mclu"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(ValueError, match="not a cluster model"):
            load_model(path)

    def test_truncated(self, tmp_path, rng):
        m = kmeans_fit(rng.standard_normal((10, 3)), 2, seed=0)
        path = tmp_path / "model.mclu"
        save_model(path, m)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            load_model(path)
