import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.graph_core import (
    AdjacencyMatrix,
    degree_summary,
    eigenvalue_range,
    empty_graph,
    exposure,
    from_dense,
    generate_ba,
    generate_er,
    generate_ws,
    load_edge_list,
    matrix_power,
    permute,
    row_normalize,
    total_weight_variance,
)
from src.utils.errors import DataError, UnsupportedError, ValidationError

from conftest import ring_graph


def edge(src, dst, weight=1.0):
    return {"src": src, "dst": dst, "weight": weight}


class TestAdjacencyMatrix:
    def test_rejects_self_loop(self):
        with pytest.raises(ValidationError, match="self-loop"):
            AdjacencyMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]), directed=True)

    def test_rejects_asymmetric_undirected(self):
        with pytest.raises(ValidationError, match="symmetric"):
            AdjacencyMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]), directed=False)

    def test_rejects_non_finite_weight(self):
        with pytest.raises(ValidationError, match="finite"):
            AdjacencyMatrix(np.array([[0.0, np.inf], [np.inf, 0.0]]))

    def test_entries_are_read_only(self, three_node_graph):
        with pytest.raises(ValueError):
            three_node_graph.entries[0, 1] = 7.0

    def test_large_graphs_are_sparse(self):
        assert not from_dense(np.zeros((10, 10))).is_sparse
        assert empty_graph(100).is_sparse


class TestLoadEdgeList:
    def test_single_directed_record(self):
        G = load_edge_list([edge(0, 1, 2.0)], directed=True)
        assert G.n == 2
        assert_array_equal(G.toarray(), [[0.0, 2.0], [0.0, 0.0]])

    def test_undirected_record_is_symmetrised(self):
        G = load_edge_list([edge(0, 1)], directed=False)
        assert_array_equal(G.toarray(), [[0.0, 1.0], [1.0, 0.0]])

    def test_duplicates_sum(self):
        G = load_edge_list([edge(0, 1, 1.0), edge(0, 1, 0.5)], directed=True)
        assert G.toarray()[0, 1] == 1.5

    def test_transpose_swaps_orientation(self):
        G = load_edge_list([edge(0, 1, 2.0)], directed=True, transpose=True)
        assert G.toarray()[1, 0] == 2.0
        assert G.toarray()[0, 1] == 0.0

    def test_missing_weight_defaults_to_one(self):
        G = load_edge_list([{"src": 0, "dst": 1, "weight": ""}], directed=True)
        assert G.toarray()[0, 1] == 1.0

    def test_self_loop_reports_record(self):
        with pytest.raises(DataError, match="record 2: self-loop"):
            load_edge_list([edge(0, 1), edge(2, 2)], directed=True)

    def test_self_loop_reports_file_line(self):
        with pytest.raises(DataError, match="line 3"):
            load_edge_list([edge(0, 1), edge(2, 2)], directed=True, first_line=2)

    def test_non_finite_weight(self):
        with pytest.raises(DataError, match="finite"):
            load_edge_list([edge(0, 1, "inf")], directed=True)

    def test_unknown_label_without_labels(self):
        with pytest.raises(DataError, match="unknown node label"):
            load_edge_list([edge("a", "b")], directed=True)

    def test_string_labels(self):
        G = load_edge_list([edge("x", "z", 3.0)], directed=True, labels=["x", "y", "z"])
        assert G.n == 3
        assert G.toarray()[0, 2] == 3.0
        assert G.node_labels == ("x", "y", "z")

    def test_index_beyond_hint(self):
        with pytest.raises(DataError, match="out of range"):
            load_edge_list([edge(0, 5)], directed=True, n_hint=3)

    def test_empty_needs_node_count(self):
        with pytest.raises(DataError, match="node count unknown"):
            load_edge_list([], directed=False)
        assert load_edge_list([], directed=False, n_hint=3).n == 3


class TestGenerators:
    def test_er_extremes(self):
        assert degree_summary(generate_er(5, 0.0, seed=1)).W == 0.0
        assert degree_summary(generate_er(5, 1.0, seed=1)).W == 20.0

    def test_er_rejects_bad_probability(self):
        with pytest.raises(ValidationError):
            generate_er(5, 1.5, seed=1)

    def test_er_is_deterministic(self):
        first = generate_er(100, 0.5, seed=7)
        second = generate_er(100, 0.5, seed=7)
        assert_array_equal(first.toarray(), second.toarray())

    def test_directed_er_is_asymmetric(self):
        G = generate_er(80, 0.2, seed=3, directed=True)
        assert G.directed
        assert not G.is_symmetric()

    def test_directed_er_edge_count(self):
        n, p = 60, 0.1
        counts = np.array([degree_summary(generate_er(n, p, seed=s, directed=True)).W for s in range(500)])
        mean = n * (n - 1) * p
        variance = n * (n - 1) * p * (1 - p)
        assert abs(counts.mean() - mean) < 4 * np.sqrt(variance / 500)
        assert counts.var(ddof=1) == pytest.approx(variance, rel=0.25)

    def test_ba_single_node(self):
        assert generate_ba(1, power=0.05, m=1, seed=0).nnz == 0

    def test_ba_edge_count(self):
        G = generate_ba(50, power=0.05, m=1, seed=3)
        assert G.nnz == 2 * 49
        assert G.is_symmetric()

    def test_ba_is_deterministic(self):
        first = generate_ba(60, power=0.05, m=2, seed=9)
        second = generate_ba(60, power=0.05, m=2, seed=9)
        assert_array_equal(first.toarray(), second.toarray())

    def test_ba_rejects_zero_m(self):
        with pytest.raises(ValidationError):
            generate_ba(10, m=0)

    def test_ws_without_rewiring_is_a_lattice(self):
        F = degree_summary(generate_ws(30, nei=10, p_rewire=0.0, seed=1)).F
        assert_array_equal(F, np.full(30, 20.0))

    def test_ws_total_weight_fixed_across_seeds(self):
        totals = {degree_summary(generate_ws(30, nei=10, p_rewire=0.05, seed=s)).W for s in range(100)}
        assert totals == {600.0}

    def test_ws_is_deterministic(self):
        first = generate_ws(100, nei=10, p_rewire=0.05, seed=5)
        second = generate_ws(100, nei=10, p_rewire=0.05, seed=5)
        assert_array_equal(first.toarray(), second.toarray())

    def test_ws_bad_parameters(self):
        with pytest.raises(ValidationError, match="n > 2"):
            generate_ws(20, nei=10, p_rewire=0.0, seed=0)
        with pytest.raises(UnsupportedError):
            generate_ws(30, nei=2, p_rewire=0.0, seed=0, dim=2)


class TestSummaries:
    def test_empty_graph(self):
        summary = degree_summary(empty_graph(3))
        assert_array_equal(summary.F, [0.0, 0.0, 0.0])
        assert summary.F_bar == 0.0
        assert summary.W == 0.0

    def test_three_node_degrees(self, three_node_graph):
        summary = degree_summary(three_node_graph)
        assert_array_equal(summary.F, [1.0, 3.0, 2.0])
        assert summary.F_bar == 2.0
        assert summary.W == 6.0
        assert summary.minimum == 1.0
        assert summary.maximum == 3.0

    def test_complete_graph(self):
        summary = degree_summary(from_dense(np.ones((4, 4)) - np.eye(4)))
        assert_array_equal(summary.F, np.full(4, 3.0))
        assert summary.W == 12.0

    def test_exposure(self, three_node_graph):
        assert_array_equal(exposure(three_node_graph, [1.0, 0.0, 2.0]), [0.0, 5.0, 0.0])
        assert_array_equal(exposure(empty_graph(3), [1.0, 2.0, 3.0]), np.zeros(3))
        assert_array_equal(exposure(three_node_graph, np.eye(3)), three_node_graph.toarray())

    def test_exposure_is_linear(self):
        G = generate_er(80, 0.05, seed=3, directed=True)
        rng = np.random.default_rng(0)
        u, v = rng.normal(size=80), rng.normal(size=80)
        assert_allclose(exposure(G, 2.0 * u - 3.0 * v), 2.0 * exposure(G, u) - 3.0 * exposure(G, v), atol=1e-10)
        assert_allclose(exposure(G, np.column_stack([u, v]))[:, 1], exposure(G, v), atol=1e-12)

    def test_degrees_follow_permutation(self):
        G = generate_er(90, 0.05, seed=4, directed=True)
        perm = np.random.default_rng(1).permutation(90)
        before = degree_summary(G)
        after = degree_summary(permute(G, perm))
        assert_allclose(after.F[perm], before.F)
        assert after.F_bar == pytest.approx(before.F_bar)
        assert after.W == pytest.approx(before.W)

    def test_exposure_dimension_mismatch(self, three_node_graph):
        with pytest.raises(ValidationError, match="rows"):
            exposure(three_node_graph, [1.0, 2.0])

    def test_total_weight_variance(self):
        assert total_weight_variance("er", 100, p=0.05, directed=True) == pytest.approx(470.25)
        assert total_weight_variance("er", 100, p=0.05) == pytest.approx(940.5)
        assert total_weight_variance("ws", 100) == 0.0
        with pytest.raises(ValidationError):
            total_weight_variance("grid", 100)


class TestTransforms:
    def test_power_one_is_identity(self, three_node_graph):
        assert matrix_power(three_node_graph, 1) is three_node_graph

    def test_square_of_path(self):
        path = from_dense([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        squared = matrix_power(path, 2).toarray()
        assert_array_equal(squared, [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])

    @pytest.mark.parametrize("directed", [False, True])
    def test_square_is_exposure_of_columns(self, directed):
        G = generate_er(100, 0.05, seed=6, directed=directed)
        expected = exposure(G, G.toarray())
        np.fill_diagonal(expected, 0.0)
        assert_allclose(matrix_power(G, 2).toarray(), expected, atol=1e-12)

    def test_power_of_empty_graph(self):
        assert matrix_power(empty_graph(5), 3).nnz == 0

    def test_power_rejects_zero(self, three_node_graph):
        with pytest.raises(ValidationError):
            matrix_power(three_node_graph, 0)

    def test_row_normalize(self):
        G = from_dense([[0, 2, 2], [2, 0, 0], [2, 0, 0]])
        normalized = row_normalize(G)
        assert_allclose(normalized.toarray()[0], [0.0, 0.5, 0.5])
        assert normalized.directed
        assert_allclose(row_normalize(normalized).toarray(), normalized.toarray(), atol=1e-12)

    def test_row_normalize_keeps_zero_rows(self):
        G = from_dense([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
        assert_array_equal(row_normalize(G).toarray()[2], np.zeros(3))

    def test_row_normalize_rejects_negative_weights(self):
        with pytest.raises(ValidationError, match="nonnegative"):
            row_normalize(from_dense([[0, -1], [-1, 0]]))

    def test_permute_identity(self, three_node_graph):
        assert_array_equal(permute(three_node_graph, [0, 1, 2]).toarray(), three_node_graph.toarray())

    def test_permute_moves_entries(self):
        G = from_dense([[0, 5], [0, 0]], directed=True)
        assert_array_equal(permute(G, [1, 0]).toarray(), [[0.0, 0.0], [5.0, 0.0]])

    def test_permute_rejects_non_bijection(self, three_node_graph):
        with pytest.raises(ValidationError, match="bijection"):
            permute(three_node_graph, [0, 0, 1])

    def test_eigenvalue_range_of_ring(self):
        lo, hi = eigenvalue_range(ring_graph(10))
        assert lo == pytest.approx(-2.0)
        assert hi == pytest.approx(2.0)
