import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from ggdenoise import (
    DisconnectedGraphWarning,
    GeodesicDistances,
    GldWeights,
    IsolatedVertexError,
    METRIC_GLD,
    PatchGraph,
    all_pairs_shortest_paths,
    build_knn_graph,
    extract_patches,
    gld_distance,
    gld_weight_matrix,
    graph_laplacian,
    patch_distance,
)
from ggdenoise import _kernels_numba as kernels_numba
from ggdenoise import _kernels_numpy as kernels_numpy
from ggdenoise.packed import PackedSymmetricMatrix, packed_length


def graph_from_edges(count, edges):
    """Symmetric PatchGraph from (i, j, w) triples."""
    rows, cols, vals = [], [], []
    for i, j, w in edges:
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    adj = sp.coo_matrix((vals, (rows, cols)), shape=(count, count)).tocsr()
    return PatchGraph(vertex_count=count, adjacency=adj, metric_kind="patch-euclidean")


def random_knn_graph(rng, count, delta, dim=4):
    points = rng.uniform(0, 10, (count, dim))
    return build_knn_graph(points, delta)


class TestDistances:
    def test_identical_patches(self):
        assert patch_distance(np.ones(9), np.ones(9)) == 0.0

    def test_three_four_five(self):
        a = np.zeros(9)
        b = np.zeros(9)
        b[0], b[1] = 3.0, 4.0
        assert patch_distance(a, b) == pytest.approx(5.0, abs=1e-15)

    def test_matches_direct_summation(self, rng):
        a, b = rng.uniform(0, 255, 9), rng.uniform(0, 255, 9)
        expected = np.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
        assert patch_distance(a, b) == pytest.approx(expected, rel=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimensions differ"):
            patch_distance(np.zeros(9), np.zeros(25))

    def test_gld_zero_beta_reduces_to_patch_distance(self, rng):
        a, b = rng.uniform(0, 255, 9), rng.uniform(0, 255, 9)
        assert gld_distance(a, b, (1, 1), (5, 9), 0.0) == patch_distance(a, b)

    def test_gld_coordinate_term(self):
        a = np.ones(9)
        assert gld_distance(a, a, (1, 1), (1, 4), 3.0) == pytest.approx(9.0, abs=1e-12)

    def test_gld_generic_sum_of_norms(self, rng):
        a, b = rng.uniform(0, 255, 9), rng.uniform(0, 255, 9)
        xa, xb = (2.0, 7.0), (5.0, 3.0)
        expected = patch_distance(a, b) + 1.5 * np.hypot(3.0, 4.0)
        assert gld_distance(a, b, xa, xb, 1.5) == pytest.approx(expected, rel=1e-14)

    def test_gld_negative_beta_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            gld_distance(np.ones(4), np.ones(4), (0, 0), (1, 1), -0.5)


class TestKnnGraph:
    def test_collinear_points_with_tie_break(self):
        # mutual distances 1, 1, 2; delta=1; the middle vertex ties and
        # must pick the smaller index
        points = np.array([[0.0], [1.0], [2.0]])
        graph = build_knn_graph(points, 1)
        dense = graph.adjacency.toarray()
        assert dense[0, 1] == 1.0 and dense[1, 0] == 1.0
        assert dense[1, 2] == 1.0 and dense[2, 1] == 1.0
        assert graph.adjacency[0, 2] == 0.0 and (0, 2) not in zip(*graph.adjacency.nonzero())

    def test_full_delta_gives_complete_graph(self, rng):
        points = rng.uniform(0, 5, (10, 3))
        graph = build_knn_graph(points, 9)
        assert graph.edge_count == 45

    def test_duplicate_points_share_zero_weight_edge(self):
        points = np.array([[1.0, 2.0], [1.0, 2.0], [9.0, 9.0], [4.0, 4.0]])
        graph = build_knn_graph(points, 1)
        indptr, indices = graph.adjacency.indptr, graph.adjacency.indices
        row0 = set(indices[indptr[0] : indptr[1]])
        assert 1 in row0  # structural edge despite zero weight
        assert graph.adjacency[0, 1] == 0.0

    def test_min_degree_at_least_delta(self, rng):
        graph = random_knn_graph(rng, 60, 5)
        assert graph.degrees().min() >= 5

    def test_adjacency_is_symmetric(self, rng):
        graph = random_knn_graph(rng, 40, 4)
        diff = (graph.adjacency - graph.adjacency.T).tocoo()
        assert np.allclose(diff.data, 0.0)
        assert graph.adjacency.diagonal().sum() == 0.0  # no self-loops

    def test_delta_out_of_range(self, rng):
        points = rng.uniform(0, 5, (10, 3))
        with pytest.raises(ValueError, match="delta"):
            build_knn_graph(points, 10)
        with pytest.raises(ValueError, match="delta"):
            build_knn_graph(points, 0)

    def test_patchset_input_uses_pixel_coords(self, scene16):
        patches = extract_patches(scene16, 3)
        graph = build_knn_graph(patches, 4, METRIC_GLD, beta=1000.0)
        # with a huge coordinate penalty the neighbors must be spatial
        dense = (graph.adjacency > 0).toarray() | (graph.adjacency.toarray() == 0)
        k = 5 * 16 + 7  # interior pixel index
        neighbors = set(graph.adjacency.indices[
            graph.adjacency.indptr[k] : graph.adjacency.indptr[k + 1]
        ])
        spatial_ring = {k - 1, k + 1, k - 16, k + 16}
        assert spatial_ring <= neighbors | {k}

    def test_raw_array_with_gld_metric_requires_coords(self, rng):
        points = rng.uniform(0, 5, (10, 3))
        with pytest.raises(ValueError, match="coords"):
            build_knn_graph(points, 2, METRIC_GLD, beta=1.0)


class TestShortestPaths:
    def test_path_graph_concatenates_weights(self):
        graph = graph_from_edges(3, [(0, 1, 1.0), (1, 2, 2.0)])
        for backend in ("floyd", "dijkstra"):
            dist = all_pairs_shortest_paths(graph, backend)
            assert dist.element(0, 2) == pytest.approx(3.0, abs=1e-12)

    def test_detour_beats_heavy_edge(self):
        graph = graph_from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 10.0)])
        dist = all_pairs_shortest_paths(graph)
        assert dist.element(0, 2) == pytest.approx(2.0, abs=1e-12)

    def test_backends_agree_on_random_graph(self, rng):
        graph = random_knn_graph(rng, 50, 4)
        d_floyd = all_pairs_shortest_paths(graph, "floyd")
        d_dijkstra = all_pairs_shortest_paths(graph, "dijkstra")
        assert np.allclose(d_floyd.matrix.buf, d_dijkstra.matrix.buf, atol=1e-9)

    def test_metric_axioms(self, rng):
        graph = random_knn_graph(rng, 40, 3)
        dense = all_pairs_shortest_paths(graph).to_dense()
        assert np.allclose(dense, dense.T)
        assert np.allclose(np.diag(dense), 0.0)
        for k in range(dense.shape[0]):  # exhaustive triangle inequality
            assert np.all(dense <= dense[:, [k]] + dense[[k], :] + 1e-9)

    def test_shortest_path_bounded_by_edge_weight(self, rng):
        graph = random_knn_graph(rng, 40, 3)
        dist = all_pairs_shortest_paths(graph)
        coo = graph.adjacency.tocoo()
        for i, j, w in zip(coo.row, coo.col, coo.data):
            assert dist.element(int(i), int(j)) <= w + 1e-12

    def test_intensity_scaling_scales_geodesics(self, rng):
        points = rng.uniform(0, 10, (40, 5))
        base = all_pairs_shortest_paths(build_knn_graph(points, 3))
        scaled = all_pairs_shortest_paths(build_knn_graph(points * 2.5, 3))
        assert np.allclose(scaled.matrix.buf, 2.5 * base.matrix.buf, rtol=1e-12)

    def test_disconnected_components_inflated_with_warning(self):
        graph = graph_from_edges(4, [(0, 1, 2.0), (2, 3, 4.0)])
        with pytest.warns(DisconnectedGraphWarning, match="inflated"):
            dist = all_pairs_shortest_paths(graph)
        assert dist.element(0, 2) == pytest.approx(6.0)  # 1.5 * largest finite
        assert np.isfinite(dist.matrix.buf).all()

    def test_unknown_backend_rejected(self, rng):
        graph = random_knn_graph(rng, 10, 2)
        with pytest.raises(ValueError, match="backend"):
            all_pairs_shortest_paths(graph, "bellman")

    def test_zero_weight_edges_traversed(self):
        graph = graph_from_edges(3, [(0, 1, 0.0), (1, 2, 5.0)])
        for backend in ("floyd", "dijkstra"):
            dist = all_pairs_shortest_paths(graph, backend)
            assert dist.element(0, 2) == pytest.approx(5.0, abs=1e-12)

    def test_dump_load_round_trip(self, rng, tmp_path):
        dist = all_pairs_shortest_paths(random_knn_graph(rng, 20, 3))
        path = tmp_path / "d.ggd1"
        dist.dump(path)
        assert path.read_bytes()[:4] == b"GGD1"
        loaded = GeodesicDistances.load(path)
        assert loaded.size == dist.size
        assert np.array_equal(loaded.matrix.buf, dist.matrix.buf)


class TestGldWeights:
    def make_graph(self, rng, count=30, delta=4):
        points = rng.uniform(0, 2, (count, 5))
        coords = rng.uniform(0, 10, (count, 2))
        return build_knn_graph(points, delta, METRIC_GLD, beta=0.3, coords=coords)

    def test_zero_distance_gives_unit_weight(self):
        points = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]])
        coords = np.zeros((3, 2))
        graph = build_knn_graph(points, 1, METRIC_GLD, beta=0.0, coords=coords)
        weights = gld_weight_matrix(graph, 2.0)
        assert weights.weights[0, 1] == 1.0

    def test_non_adjacent_weight_is_zero(self, rng):
        graph = self.make_graph(rng)
        weights = gld_weight_matrix(graph, 2.0)
        dense = weights.weights.toarray()
        adj_pattern = np.zeros_like(dense, dtype=bool)
        adj = graph.adjacency.tocoo()
        adj_pattern[adj.row, adj.col] = True
        assert np.all(dense[~adj_pattern] == 0.0)

    def test_unit_ratio_weight(self):
        gamma = 2.0
        graph = graph_from_edges(2, [(0, 1, gamma)])
        graph = PatchGraph(2, graph.adjacency, METRIC_GLD, beta=0.0)
        weights = gld_weight_matrix(graph, gamma)
        assert weights.weights[0, 1] == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_weights_symmetric_and_in_unit_interval(self, rng):
        weights = gld_weight_matrix(self.make_graph(rng), 1.5)
        dense = weights.weights.toarray()
        assert np.allclose(dense, dense.T)
        assert dense.min() >= 0.0 and dense.max() <= 1.0

    def test_requires_gld_metric(self, rng):
        graph = random_knn_graph(rng, 20, 3)
        with pytest.raises(ValueError, match="metric"):
            gld_weight_matrix(graph, 2.0)

    def test_rejects_nonpositive_gamma(self, rng):
        with pytest.raises(ValueError, match="gamma"):
            gld_weight_matrix(self.make_graph(rng), 0.0)


class TestGraphLaplacian:
    def test_two_vertex_hand_value(self):
        graph = PatchGraph(
            2,
            sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])),
            METRIC_GLD,
        )
        weights = GldWeights(
            weights=graph.adjacency, gamma=1.0, degree_sums=np.array([1.0, 1.0])
        )
        lap = graph_laplacian(weights).toarray()
        assert np.allclose(lap, np.array([[1.0, -1.0], [-1.0, 1.0]]), atol=1e-15)

    def test_regular_graph_kernel_contains_constant(self):
        # ring graph, all weights equal
        count = 12
        edges = [(i, (i + 1) % count, 1.0) for i in range(count)]
        graph = graph_from_edges(count, edges)
        weights = GldWeights(
            weights=graph.adjacency,
            gamma=1.0,
            degree_sums=np.asarray(graph.adjacency.sum(axis=1)).ravel(),
        )
        lap = graph_laplacian(weights)
        assert np.allclose(lap @ np.ones(count), 0.0, atol=1e-12)

    def test_spectrum_in_zero_two_and_psd(self, rng):
        graph = TestGldWeights().make_graph(rng, count=40)
        weights = gld_weight_matrix(graph, 1.5)
        eigvals = np.linalg.eigvalsh(graph_laplacian(weights).toarray())
        assert eigvals.min() >= -1e-9
        assert eigvals.max() <= 2.0 + 1e-9

    def test_isolated_vertex_rejected(self):
        weights = GldWeights(
            weights=sp.csr_matrix((3, 3)),
            gamma=1.0,
            degree_sums=np.array([0.0, 1.0, 1.0]),
        )
        with pytest.raises(IsolatedVertexError, match="zero degree"):
            graph_laplacian(weights)


class TestKernelBackendsAgree:
    """The numba kernels and the numpy/scipy fallbacks are interchangeable."""

    def test_knn_kernels_match(self, rng):
        points = rng.uniform(0, 255, (80, 9))
        coords = rng.uniform(0, 16, (80, 2))
        for beta in (0.0, 2.0):
            idx_a, dist_a = kernels_numba.knn_neighbors(points, coords, beta, 6)
            idx_b, dist_b = kernels_numpy.knn_neighbors(points, coords, beta, 6)
            assert np.array_equal(idx_a, idx_b)
            assert np.allclose(dist_a, dist_b, atol=1e-9)

    def test_dijkstra_kernels_match(self, rng):
        graph = random_knn_graph(rng, 70, 4)
        indptr = graph.adjacency.indptr.astype(np.int64)
        indices = graph.adjacency.indices.astype(np.int64)
        data = graph.adjacency.data.astype(np.float64)
        out_a = np.empty(packed_length(70))
        out_b = np.empty(packed_length(70))
        kernels_numba.apsp_dijkstra_packed(indptr, indices, data, 70, out_a)
        kernels_numpy.apsp_dijkstra_packed(indptr, indices, data, 70, out_b)
        assert np.allclose(out_a, out_b, atol=1e-9)

    def test_floyd_kernels_match(self, rng):
        graph = random_knn_graph(rng, 50, 3)
        dense = np.full((50, 50), np.inf)
        np.fill_diagonal(dense, 0.0)
        coo = graph.adjacency.tocoo()
        dense[coo.row, coo.col] = coo.data
        other = dense.copy()
        kernels_numba.floyd_warshall(dense)
        kernels_numpy.floyd_warshall(other)
        assert np.allclose(dense, other, atol=1e-9)
