import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from graphranktest.graph import (
    DisconnectedGraphError,
    build_kmst,
    build_knn,
    check_distance_matrix,
    compute_distances,
    from_undirected,
    kmst_trees,
    minimum_spanning_tree,
)


def undirected_set(g):
    return {tuple(e) for e in g.undirected_edges().tolist()}


def assert_orientation_closed(g):
    fwd = {tuple(e) for e in g.edges.tolist()}
    assert fwd == {(j, i) for i, j in fwd}
    assert all(i != j for i, j in fwd)
    assert len(fwd) == g.n_edges == 2 * g.undirected_edge_count


class TestDistances:
    def test_one_dimensional(self):
        d = compute_distances([[0.0], [3.0], [4.0]])
        np.testing.assert_array_equal(d, [[0, 3, 4], [3, 0, 1], [4, 1, 0]])

    def test_identical_rows(self):
        d = compute_distances([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
        assert d[0, 1] == 0.0
        assert d[0, 2] > 0

    def test_matches_double_loop(self, rng):
        X = rng.normal(size=(5, 3))
        np.testing.assert_allclose(compute_distances(X), oracles.distances(X.tolist()), rtol=1e-14, atol=1e-15)

    def test_properties(self, rng):
        d = compute_distances(rng.normal(size=(12, 4)))
        np.testing.assert_array_equal(d, d.T)
        assert np.all(np.diag(d) == 0)
        assert np.all(d >= 0)

    def test_non_finite_row_named(self):
        X = np.zeros((4, 2))
        X[2, 1] = np.nan
        with pytest.raises(ValueError, match="row 2"):
            compute_distances(X)

    def test_precomputed_validation(self):
        with pytest.raises(ValueError, match="symmetric"):
            check_distance_matrix([[0, 1], [2, 0]])
        with pytest.raises(ValueError, match="square"):
            check_distance_matrix(np.zeros((2, 3)))
        with pytest.raises(ValueError, match="diagonal"):
            check_distance_matrix([[1, 1], [1, 0]])


class TestKmst:
    def test_two_nodes(self):
        g = build_kmst(compute_distances([[0.0], [1.0]]), 1)
        assert {tuple(e) for e in g.edges.tolist()} == {(0, 1), (1, 0)}

    def test_three_points_on_a_line(self):
        g = build_kmst(compute_distances([[0.0], [1.0], [3.0]]), 1)
        assert undirected_set(g) == {(0, 1), (1, 2)}

    def test_trees_against_exhaustive_enumeration(self, rng):
        X = rng.normal(size=(6, 2))
        d = compute_distances(X)
        trees = kmst_trees(d, 2)
        weights = {(i, j): d[i, j] for i in range(6) for j in range(i + 1, 6)}
        best1, w1 = oracles.min_spanning_tree(6, weights)
        assert {tuple(e) for e in trees[0].tolist()} == best1
        assert sum(d[i, j] for i, j in trees[0]) == pytest.approx(w1, rel=1e-12)
        residual = {e: w for e, w in weights.items() if e not in best1}
        best2, w2 = oracles.min_spanning_tree(6, residual)
        assert {tuple(e) for e in trees[1].tolist()} == best2
        assert sum(d[i, j] for i, j in trees[1]) == pytest.approx(w2, rel=1e-12)

    def test_edge_count_and_disjointness(self, rng):
        d = compute_distances(rng.normal(size=(30, 5)))
        trees = kmst_trees(d, 4)
        seen = set()
        for tree in trees:
            pairs = {tuple(e) for e in tree.tolist()}
            assert len(pairs) == 29
            assert not pairs & seen
            seen |= pairs
        g = build_kmst(d, 4)
        assert g.undirected_edge_count == 4 * 29
        assert_orientation_closed(g)

    def test_too_many_trees(self):
        with pytest.raises(ValueError, match="node pairs"):
            build_kmst(compute_distances(np.arange(4.0)[:, None]), 3)

    def test_disconnected_residual_reports_round(self):
        # complete graph on 4 nodes has 6 edges = 2 trees; a star tree first
        # leaves a triangle plus an isolated centre
        d = np.array([[0, 1, 1, 1], [1, 0, 5, 5], [1, 5, 0, 5], [1, 5, 5, 0]], dtype=float)
        with pytest.raises(DisconnectedGraphError) as info:
            build_kmst(d, 2)
        assert info.value.round_index == 2

    def test_ties_are_deterministic(self):
        # all distances equal: lexicographic order gives the star at node 0
        d = np.ones((5, 5)) - np.eye(5)
        tree = minimum_spanning_tree(d)
        assert {tuple(e) for e in tree.tolist()} == {(0, 1), (0, 2), (0, 3), (0, 4)}
        np.testing.assert_array_equal(build_kmst(d, 1).edges, build_kmst(d.copy(), 1).edges)

    def test_scale_invariance(self, rng):
        d = compute_distances(rng.normal(size=(25, 3)))
        assert undirected_set(build_kmst(d, 3)) == undirected_set(build_kmst(7.5 * d, 3))


class TestKnn:
    def test_three_points(self):
        g = build_knn(compute_distances([[0.0], [1.0], [3.0]]), 1)
        assert undirected_set(g) == {(0, 1), (1, 2)}

    def test_saturation_is_complete(self, rng):
        n = 7
        g = build_knn(compute_distances(rng.normal(size=(n, 2))), n - 1)
        assert g.n_edges == n * (n - 1)

    def test_matches_sort_oracle(self, rng):
        d = compute_distances(rng.normal(size=(8, 3)))
        g = build_knn(d, 3)
        assert undirected_set(g) == oracles.knn_edges(d.tolist(), 3)
        assert_orientation_closed(g)

    def test_k_out_of_range(self, rng):
        d = compute_distances(rng.normal(size=(5, 2)))
        with pytest.raises(ValueError):
            build_knn(d, 5)
        with pytest.raises(ValueError):
            build_knn(d, 0)


class TestSimilarityGraph:
    def test_from_undirected_merges_duplicates(self):
        g = from_undirected(3, [(0, 1), (1, 0), (1, 2)])
        assert g.undirected_edge_count == 2
        assert_orientation_closed(g)

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError, match="self-loops"):
            from_undirected(3, [(1, 1)])

    def test_adjacency(self):
        g = from_undirected(4, [(0, 1), (1, 2), (2, 3)])
        assert [a.tolist() for a in g.adjacency] == [[1], [0, 2], [1, 3], [2]]

    def test_immutable_edges(self):
        g = from_undirected(3, [(0, 1)])
        with pytest.raises(ValueError):
            g.edges[0, 0] = 2


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(5, 25), kind=st.sampled_from(["kmst", "knn"]))
def test_permutation_equivariance(seed, n, kind):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    perm = rng.permutation(n)
    # row perm[i] of the relabelled data is old row i
    Xp = np.empty_like(X)
    Xp[perm] = X
    build = build_kmst if kind == "kmst" else build_knn
    try:
        g = build(compute_distances(X), 2)
    except DisconnectedGraphError:
        # feasibility is itself label-free
        with pytest.raises(DisconnectedGraphError):
            build(compute_distances(Xp), 2)
        return
    gp = build(compute_distances(Xp), 2)
    assert_orientation_closed(g)
    assert_orientation_closed(gp)
    np.testing.assert_array_equal(g.relabel(perm).edges, gp.edges)
