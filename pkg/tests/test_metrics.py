import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphflex import synth
from graphflex.graph import build_graph
from graphflex.metrics import bound_table, conductance, edge_prf, modularity, nmi


class TestModularity:
    def test_golden_two_triangles(self, two_triangles_bridge):
        q = modularity(two_triangles_bridge, [0, 0, 0, 1, 1, 1])
        assert q == pytest.approx(5 / 14, abs=1e-12)

    def test_single_community_zero(self, two_triangles_bridge):
        assert modularity(two_triangles_bridge, [0] * 6) == pytest.approx(0.0, abs=1e-12)

    def test_random_labels_near_zero(self):
        p = synth.DcsbmParams(n=1000, k=1, P=np.array([[0.01]]), rho=1.0,
                              theta_values=np.array([1.0]), pi=np.array([[1.0]]), seed=0)
        g = synth.gen_dcsbm(p).graph
        rng = np.random.default_rng(1)
        qs = [modularity(g, rng.integers(0, 4, size=1000)) for _ in range(5)]
        assert max(abs(q) for q in qs) <= 0.05

    def test_empty_graph_errors(self):
        with pytest.raises(ValueError):
            modularity(build_graph(3, []), [0, 0, 1])


class TestConductance:
    def test_disconnected_zero(self):
        g = build_graph(4, [(0, 1, 1.0), (2, 3, 1.0)])
        assert conductance(g, [0, 0, 1, 1]) == 0.0

    def test_golden_two_triangles(self, two_triangles_bridge):
        assert conductance(two_triangles_bridge, [0, 0, 0, 1, 1, 1]) == pytest.approx(
            1 / 7, abs=1e-12
        )

    def test_single_community_errors(self, two_triangles_bridge):
        with pytest.raises(ValueError):
            conductance(two_triangles_bridge, [0] * 6)

    def test_zero_volume_errors(self):
        g = build_graph(3, [(0, 1, 1.0)])
        with pytest.raises(ValueError, match="zero volume"):
            conductance(g, [0, 0, 1])  # node 2 is isolated


class TestNmi:
    def test_identical_nontrivial(self):
        assert nmi([0, 1, 0, 2], [0, 1, 0, 2]) == 1.0

    def test_relabeling_invariance(self):
        assert nmi([0, 1, 0, 2], [5, 3, 5, 7]) == 1.0

    def test_independent_random_near_zero(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 4, size=10_000)
        b = rng.integers(0, 4, size=10_000)
        assert nmi(a, b) < 0.01

    def test_degenerate_sides(self):
        assert nmi([1, 1, 1], [2, 2, 2]) == 1.0
        assert nmi([1, 1, 1], [0, 1, 1]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nmi([0, 1], [0, 1, 2])

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.integers(min_value=0, max_value=3), min_size=2, max_size=30),
        st.integers(min_value=0, max_value=10_000),
    )
    def test_bounds_and_symmetry(self, a, seed):
        b = np.random.default_rng(seed).integers(0, 3, size=len(a)).tolist()
        v = nmi(a, b)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(nmi(b, a), abs=1e-12)


class TestEdgePrf:
    def test_perfect(self, two_triangles_bridge):
        em = edge_prf(two_triangles_bridge, two_triangles_bridge)
        assert em.precision == em.recall == em.f1 == 1.0

    def test_empty_learned(self, two_triangles_bridge):
        em = edge_prf(build_graph(6, []), two_triangles_bridge)
        assert em.precision == 0.0 and em.recall == 0.0 and em.f1 == 0.0

    def test_half_overlap(self):
        truth = build_graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
        learned = build_graph(3, [(0, 1, 1.0), (0, 2, 1.0)])
        em = edge_prf(learned, truth)
        assert (em.precision, em.recall, em.f1) == (0.5, 0.5, 0.5)

    def test_size_mismatch(self, two_triangles_bridge):
        with pytest.raises(ValueError):
            edge_prf(build_graph(5, []), two_triangles_bridge)

    def test_weights_ignored(self):
        a = build_graph(3, [(0, 1, 5.0)])
        b = build_graph(3, [(0, 1, 0.1)])
        assert edge_prf(a, b).f1 == 1.0


class TestBoundTable:
    def test_golden_row_at_c_equals_r(self):
        rows = bound_table(1.0, [1.0], trials=10_000, seed=0)
        assert rows[0]["bound"] == pytest.approx(0.68603, abs=1e-4)
        assert rows[0]["exact"] <= rows[0]["bound"]

    def test_large_distance_limits(self):
        rows = bound_table(1.0, [50.0, 200.0], trials=1000, seed=0)
        # the exact probability vanishes while the bound goes loose toward 1
        assert rows[1]["exact"] < rows[0]["exact"] < 0.01
        assert rows[1]["bound"] > 0.95

    def test_empirical_within_three_sigma(self):
        rows = bound_table(1.0, [0.1, 0.5, 1.0, 2.0], trials=100_000, seed=3)
        for r in rows:
            sigma = np.sqrt(r["exact"] * (1 - r["exact"]) / 100_000)
            assert abs(r["empirical"] - r["exact"]) <= 3 * sigma + 1e-9

    def test_exact_monotone_and_bounded(self):
        rows = bound_table(1.0, np.geomspace(0.05, 20, 15), trials=1000, seed=1)
        ex = [r["exact"] for r in rows]
        assert all(a >= b - 1e-12 for a, b in zip(ex, ex[1:]))
        assert all(r["exact"] <= r["bound"] for r in rows)

    def test_nonpositive_grid_rejected(self):
        with pytest.raises(ValueError):
            bound_table(1.0, [0.0], trials=100)
