import numpy as np
import pytest
import scipy.sparse as sp

from ggdenoise import (
    ConvergenceError,
    GeodesicDistances,
    GramianMatrix,
    PatchSet,
    SpectralBasis,
    all_pairs_shortest_paths,
    build_knn_graph,
    denoise_patches,
    gramian_from_distances,
    top_eigenpairs,
)
from ggdenoise.packed import PackedSymmetricMatrix
from ggdenoise.spectral import _thick_restart_lanczos


def distances_from_dense(dense):
    return GeodesicDistances(PackedSymmetricMatrix.from_dense(np.asarray(dense, float)))


def random_symmetric(rng, size):
    a = rng.standard_normal((size, size))
    return (a + a.T) / 2.0


def random_distances(rng, count):
    graph = build_knn_graph(rng.uniform(0, 10, (count, 4)), 3)
    return all_pairs_shortest_paths(graph)


class TestPackedStorage:
    def test_dense_round_trip(self, rng):
        dense = random_symmetric(rng, 17)
        packed = PackedSymmetricMatrix.from_dense(dense)
        assert np.allclose(packed.to_dense(), dense)

    def test_matvec_matches_dense(self, rng):
        dense = random_symmetric(rng, 23)
        packed = PackedSymmetricMatrix.from_dense(dense)
        x = rng.standard_normal(23)
        assert np.allclose(packed.matvec(x), dense @ x, atol=1e-12)

    def test_element_and_diagonal(self, rng):
        dense = random_symmetric(rng, 9)
        packed = PackedSymmetricMatrix.from_dense(dense)
        assert packed.element(7, 2) == pytest.approx(dense[7, 2])
        assert np.allclose(packed.diagonal(), np.diag(dense))

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="entries"):
            PackedSymmetricMatrix(4, np.zeros(9))


class TestGramian:
    def test_zero_distances_give_zero_gramian(self):
        gram = gramian_from_distances(distances_from_dense(np.zeros((4, 4))))
        assert np.allclose(gram.to_dense(), 0.0)

    def test_hand_computed_two_point_case(self):
        gram = gramian_from_distances(distances_from_dense([[0.0, 2.0], [2.0, 0.0]]))
        assert np.allclose(gram.to_dense(), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-14)

    def test_matches_dense_centering_oracle(self, rng):
        distances = random_distances(rng, 40)
        dense = distances.to_dense()
        m = dense.shape[0]
        centering = np.eye(m) - np.ones((m, m)) / m
        expected = -0.5 * centering @ dense @ centering
        gram = gramian_from_distances(distances)
        assert np.allclose(gram.to_dense(), expected, atol=1e-9)

    def test_row_sums_vanish(self, rng):
        distances = random_distances(rng, 50)
        gram = gramian_from_distances(distances)
        m = gram.size
        assert np.max(np.abs(gram.row_sums())) <= 1e-6 * m

    def test_constant_vector_in_kernel(self, rng):
        gram = gramian_from_distances(random_distances(rng, 30))
        ones = np.ones(gram.size)
        assert np.max(np.abs(gram.matrix.matvec(ones))) <= 1e-6

    def test_symmetry(self, rng):
        gram = gramian_from_distances(random_distances(rng, 30))
        dense = gram.to_dense()
        assert np.allclose(dense, dense.T, atol=1e-9)

    def test_rejects_non_finite(self):
        bad = distances_from_dense([[0.0, np.inf], [np.inf, 0.0]])
        with pytest.raises(ValueError, match="non-finite"):
            gramian_from_distances(bad)


class TestTopEigenpairs:
    def test_diagonal_case(self):
        basis = top_eigenpairs(np.diag([3.0, 1.0]), 1, "largest")
        assert basis.values[0] == pytest.approx(3.0)
        assert np.allclose(np.abs(basis.vectors[0]), [1.0, 0.0], atol=1e-12)
        assert basis.vectors[0][0] > 0  # sign convention

    def test_two_point_gramian(self):
        gram = gramian_from_distances(distances_from_dense([[0.0, 2.0], [2.0, 0.0]]))
        basis = top_eigenpairs(gram, 1, "largest")
        assert basis.values[0] == pytest.approx(1.0)
        assert np.allclose(basis.vectors[0], [1 / np.sqrt(2), -1 / np.sqrt(2)])

    @pytest.mark.parametrize("rule", ["largest", "smallest"])
    def test_lanczos_matches_dense_oracle(self, rng, rule):
        matrix = random_symmetric(rng, 50)
        lz = top_eigenpairs(matrix, 5, rule, driver="lanczos")
        dn = top_eigenpairs(matrix, 5, rule, driver="dense")
        scale = np.abs(dn.values).max()
        assert np.allclose(lz.values, dn.values, atol=1e-8 * scale)
        overlap = np.abs(lz.vectors @ dn.vectors.T)
        assert np.allclose(np.diag(overlap), 1.0, atol=1e-8)

    def test_orthonormality_and_residuals(self, rng):
        matrix = random_symmetric(rng, 60)
        basis = top_eigenpairs(matrix, 6, "largest", driver="lanczos")
        gram = basis.vectors @ basis.vectors.T
        assert np.allclose(gram, np.eye(6), atol=1e-8)
        norm = np.linalg.norm(matrix, "fro")
        for value, vector in zip(basis.values, basis.vectors):
            residual = np.linalg.norm(matrix @ vector - value * vector)
            assert residual <= 1e-6 * norm

    def test_deterministic_across_runs(self, rng):
        matrix = random_symmetric(rng, 40)
        a = top_eigenpairs(matrix, 4, "largest", driver="lanczos")
        b = top_eigenpairs(matrix, 4, "largest", driver="lanczos")
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.vectors, b.vectors)

    def test_sparse_input_smallest(self, rng):
        dense = random_symmetric(rng, 40)
        sparse = sp.csr_matrix(dense)
        got = top_eigenpairs(sparse, 3, "smallest", driver="lanczos")
        want = np.linalg.eigvalsh(dense)[:3]
        assert np.allclose(got.values, want, atol=1e-7 * np.abs(want).max())
        assert got.source == "laplacian"
        assert np.all(np.diff(got.values) >= -1e-12)  # ascending order

    def test_count_out_of_range(self, rng):
        matrix = random_symmetric(rng, 10)
        with pytest.raises(ValueError, match="count"):
            top_eigenpairs(matrix, 0)
        with pytest.raises(ValueError, match="count"):
            top_eigenpairs(matrix, 11)

    def test_convergence_failure_reports_residual(self, rng):
        matrix = random_symmetric(rng, 80)
        matvec = lambda x: matrix @ x  # noqa: E731
        with pytest.raises(ConvergenceError) as excinfo:
            _thick_restart_lanczos(matvec, 80, 10, max_steps=3, tol=1e-14)
        assert excinfo.value.achieved_residual is not None
        assert excinfo.value.achieved_residual > 0

    def test_full_spectrum_via_lanczos_small(self, rng):
        matrix = random_symmetric(rng, 12)
        basis = top_eigenpairs(matrix, 12, "largest", driver="lanczos")
        dense = top_eigenpairs(matrix, 12, "largest", driver="dense")
        assert np.allclose(basis.values, dense.values, atol=1e-8)


class TestDenoisePatches:
    def make_patchset(self, rng, n=4, rho=3):
        return PatchSet(n=n, rho=rho, patches=rng.uniform(0, 255, (n * n, rho * rho)))

    def full_basis(self, rng, size):
        matrix = random_symmetric(rng, size)
        return top_eigenpairs(matrix, size, "largest", driver="dense")

    def test_complete_basis_reproduces_input(self, rng):
        patches = self.make_patchset(rng)
        basis = self.full_basis(rng, patches.count)
        out = denoise_patches(patches, basis, basis.count)
        assert np.max(np.abs(out.patches - patches.patches)) < 1e-6

    def test_coordinate_basis_keeps_only_first_patch(self, rng):
        patches = self.make_patchset(rng)
        basis = SpectralBasis(
            source="gramian",
            values=np.array([1.0]),
            vectors=np.eye(patches.count)[:1],
        )
        out = denoise_patches(patches, basis, 1)
        assert np.array_equal(out.patches[0], patches.patches[0])
        assert np.all(out.patches[1:] == 0.0)

    def test_matches_least_squares_oracle(self, rng):
        patches = self.make_patchset(rng)
        basis = self.full_basis(rng, patches.count).take(2)
        out = denoise_patches(patches, basis, 2)
        span = basis.vectors.T  # (m, 2)
        expected, *_ = np.linalg.lstsq(span, patches.patches, rcond=None)
        assert np.allclose(out.patches, span @ expected, atol=1e-9)

    def test_idempotent(self, rng):
        patches = self.make_patchset(rng)
        basis = self.full_basis(rng, patches.count).take(5)
        once = denoise_patches(patches, basis, 5)
        twice = denoise_patches(once, basis, 5)
        assert np.max(np.abs(twice.patches - once.patches)) < 1e-9

    def test_non_expansive_per_slot(self, rng):
        patches = self.make_patchset(rng)
        basis = self.full_basis(rng, patches.count).take(5)
        out = denoise_patches(patches, basis, 5)
        before = np.linalg.norm(patches.patches, axis=0)
        after = np.linalg.norm(out.patches, axis=0)
        assert np.all(after <= before + 1e-9)

    def test_monotone_refinement_with_nested_bases(self, rng):
        patches = self.make_patchset(rng)
        full = self.full_basis(rng, patches.count)
        residuals = []
        for count in (2, 5, 9):
            out = denoise_patches(patches, full.take(count), count)
            residuals.append(np.linalg.norm(out.patches - patches.patches, axis=0))
        assert np.all(residuals[1] <= residuals[0] + 1e-9)
        assert np.all(residuals[2] <= residuals[1] + 1e-9)

    def test_dimension_mismatch_rejected(self, rng):
        patches = self.make_patchset(rng)
        basis = self.full_basis(rng, 9)
        with pytest.raises(ValueError, match="dimension"):
            denoise_patches(patches, basis, 2)

    def test_count_validation(self, rng):
        patches = self.make_patchset(rng)
        basis = self.full_basis(rng, patches.count).take(3)
        with pytest.raises(ValueError, match="count"):
            denoise_patches(patches, basis, 4)
        with pytest.raises(ValueError, match="count"):
            denoise_patches(patches, basis, 0)


class TestBasisIO:
    def test_dump_load_round_trip(self, rng, tmp_path):
        matrix = random_symmetric(rng, 20)
        basis = top_eigenpairs(matrix, 4, "largest")
        path = tmp_path / "b.ggb1"
        basis.dump(path)
        raw = path.read_bytes()
        assert raw[:4] == b"GGB1"
        loaded = SpectralBasis.load(path, basis.source)
        assert loaded.source == basis.source
        assert np.array_equal(loaded.values, basis.values)
        assert np.array_equal(loaded.vectors, basis.vectors)

    def test_truncated_file_rejected(self, rng, tmp_path):
        matrix = random_symmetric(rng, 10)
        basis = top_eigenpairs(matrix, 2, "largest")
        path = tmp_path / "b.ggb1"
        basis.dump(path)
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(ValueError, match="truncated"):
            SpectralBasis.load(path)

    def test_take_requires_valid_count(self, rng):
        basis = top_eigenpairs(random_symmetric(rng, 10), 3, "largest")
        with pytest.raises(ValueError, match="count"):
            basis.take(4)
