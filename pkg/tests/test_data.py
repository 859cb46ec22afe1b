import numpy as np
import pytest

from mqforest.core import DataMatrix
from mqforest.data import (GroundTruth, VectorFileError, brute_force_knn, gen_clustered_sphere,
                           gen_uniform_sphere, load_ivecs, load_vectors, recall, save_ivecs, save_vectors,
                           split_queries)


class TestGenerators:
    def test_uniform_unit_and_centred(self):
        data = gen_uniform_sphere(20000, 8, seed=1)
        X = data.rows.astype(np.float64)
        np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-6)
        assert np.all(np.abs(X.mean(axis=0)) < 3 / np.sqrt(20000))

    def test_clustered_limits(self):
        data, labels = gen_clustered_sphere(500, 6, num_clusters=4, spread=1e-9, seed=2)
        assert len(np.unique(np.round(data.rows, 5), axis=0)) <= 4
        assert labels.shape == (500,) and set(labels.tolist()) <= set(range(4))
        wide, _ = gen_clustered_sphere(20000, 6, num_clusters=1, spread=1e3, seed=2)
        assert np.all(np.abs(wide.rows.mean(axis=0)) < 0.05)

    def test_intrinsic_dim_confines_noise(self):
        data, labels = gen_clustered_sphere(2000, 20, num_clusters=2, spread=0.01, seed=3, intrinsic_dim=3)
        pts = data.rows[labels == 0].astype(np.float64)
        sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
        assert sv[3] < 0.05 * sv[0]

    @staticmethod
    def _mean_gap(data):
        """Mean distance from each query to the normalised centroid of its 100-NN."""
        base, qs, _ = split_queries(data, 50, seed=0)
        gt = brute_force_knn(base, qs, 100)
        c = base.rows.astype(np.float64)[gt.ids].mean(axis=1)
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        return float(np.linalg.norm(qs - c, axis=1).mean())

    def test_isotropic_clusters_tighter_than_uniform(self):
        # 50 isotropic clusters, spread 0.15, against uniform data of the same size
        clustered, _ = gen_clustered_sphere(100_000, 64, 50, 0.15, seed=4)
        uniform = gen_uniform_sphere(100_000, 64, seed=4)
        assert self._mean_gap(clustered) < self._mean_gap(uniform)

    def test_low_intrinsic_dim_clusters_tighter_than_uniform(self):
        clustered, _ = gen_clustered_sphere(100_000, 64, 50, 0.22, seed=4, intrinsic_dim=8)
        uniform = gen_uniform_sphere(100_000, 64, seed=4)
        assert self._mean_gap(clustered) < self._mean_gap(uniform)

    def test_errors(self):
        with pytest.raises(ValueError):
            gen_uniform_sphere(0, 5)
        with pytest.raises(ValueError):
            gen_clustered_sphere(10, 5, num_clusters=0)
        with pytest.raises(ValueError):
            gen_clustered_sphere(10, 5, spread=0)
        with pytest.raises(ValueError):
            gen_clustered_sphere(10, 5, intrinsic_dim=6)

    def test_split_excludes_queries(self):
        data = gen_uniform_sphere(100, 4, seed=0)
        base, qs, qids = split_queries(data, 10, seed=1)
        assert len(base) == 90 and qs.shape == (10, 4)
        np.testing.assert_array_equal(qs, data.rows[qids].astype(np.float64))
        with pytest.raises(ValueError):
            split_queries(data, 100)


class TestFiles:
    def test_round_trip_bit_identical(self, tmp_path, small_uniform):
        path = tmp_path / "x.fvecs"
        save_vectors(small_uniform, path)
        again = load_vectors(path)
        assert again.rows.tobytes() == small_uniform.rows.tobytes()
        assert path.stat().st_size == len(small_uniform) * (small_uniform.dim + 1) * 4

    def test_ivecs_round_trip(self, tmp_path):
        arr = np.arange(12, dtype=np.int32).reshape(3, 4)
        save_ivecs(arr, tmp_path / "a.ivecs")
        np.testing.assert_array_equal(load_ivecs(tmp_path / "a.ivecs"), arr)

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.fvecs").write_bytes(b"")
        with pytest.raises(VectorFileError, match="empty"):
            load_vectors(tmp_path / "e.fvecs")

    def test_mixed_dimensions_reports_record(self, tmp_path):
        rec = lambda d: np.array([d], "<i4").tobytes() + np.ones(d, "<f4").tobytes()
        (tmp_path / "m.fvecs").write_bytes(rec(3) + rec(3) + rec(2) + rec(3))
        with pytest.raises(VectorFileError, match="record 2 at byte 32"):
            load_vectors(tmp_path / "m.fvecs")

    def test_truncated(self, tmp_path):
        rec = np.array([3], "<i4").tobytes() + np.ones(3, "<f4").tobytes()
        (tmp_path / "t.fvecs").write_bytes(rec + rec[:10])
        with pytest.raises(VectorFileError, match="truncated record 1 at byte 16"):
            load_vectors(tmp_path / "t.fvecs")

    def test_ground_truth_files(self, tmp_path, small_uniform):
        gt = brute_force_knn(small_uniform, small_uniform[:3], 5)
        gt.save(tmp_path / "g.ivecs", tmp_path / "g.dist.fvecs")
        again = GroundTruth.load(tmp_path / "g.ivecs", tmp_path / "g.dist.fvecs")
        np.testing.assert_array_equal(again.ids, gt.ids)
        np.testing.assert_allclose(again.distances, gt.distances, rtol=1e-6, atol=1e-7)
        assert again.pairs(0)[0][0] == 0


class TestBruteForce:
    def test_matches_quadratic_scan(self, rng):
        X = rng.standard_normal((32, 5))
        data = DataMatrix(X / np.linalg.norm(X, axis=1, keepdims=True), dtype=np.float64)
        qs = rng.standard_normal((6, 5))
        gt = brute_force_knn(data, qs, 7)
        for i, q in enumerate(qs):
            pairs = sorted((float(np.linalg.norm(data[j] - q)), j) for j in range(32))[:7]
            assert gt.ids[i].tolist() == [j for _, j in pairs]
            np.testing.assert_allclose(gt.distances[i], [d for d, _ in pairs])

    def test_self_first_and_ties_by_id(self):
        data = DataMatrix([[1, 0], [0, 1], [0, 1], [-1, 0]], dtype=np.float64)
        gt = brute_force_knn(data, np.array([[0.0, 1.0]]), 4)
        assert gt.ids[0].tolist() == [1, 2, 0, 3]
        assert gt.distances[0, 0] == 0.0

    def test_k_equals_n_is_full_sort(self, small_uniform):
        q = small_uniform[5]
        gt = brute_force_knn(small_uniform, q, len(small_uniform))
        assert sorted(gt.ids[0].tolist()) == list(range(len(small_uniform)))
        assert np.all(np.diff(gt.distances[0]) >= 0)

    def test_errors(self, small_uniform):
        with pytest.raises(ValueError):
            brute_force_knn(small_uniform, small_uniform[0], len(small_uniform) + 1)
        with pytest.raises(ValueError):
            brute_force_knn(small_uniform, np.ones(3), 1)

    def test_recall(self):
        assert recall([1, 2, 3], [3, 2, 1]) == 1.0
        assert recall([1, 9], [1, 2, 3, 4]) == 0.25
        with pytest.raises(ValueError):
            recall([1], [])
