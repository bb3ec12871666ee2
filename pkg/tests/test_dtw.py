"""Warping distance against a brute-force lattice oracle, plus affinity
and caching behaviour."""

import numpy as np
import pytest

from hypercast.dtw import (compute_dtw_adjacency, dtw_affinity, dtw_distance,
                           dtw_distance_matrix)


def brute_force_dtw(a, b):
    """Independent reference: plain row-by-row fill of the full lattice."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    r, c = len(a), len(b)
    dp = np.empty((r, c))
    for i in range(r):
        for j in range(c):
            cost = abs(a[i] - b[j])
            if i == 0 and j == 0:
                dp[i, j] = cost
            elif i == 0:
                dp[i, j] = cost + dp[i, j - 1]
            elif j == 0:
                dp[i, j] = cost + dp[i - 1, j]
            else:
                dp[i, j] = cost + min(dp[i - 1, j], dp[i, j - 1], dp[i - 1, j - 1])
    return dp[r - 1, c - 1]


class TestDistance:
    def test_identical_sequences_zero(self):
        x = np.sin(np.linspace(0, 6, 50))
        assert dtw_distance(x, x) == 0.0

    def test_hand_case(self):
        """a=[0,0,1], b=[0,1,1]: the warp aligns the step change, cost 0."""
        assert dtw_distance([0, 0, 1], [0, 1, 1]) == brute_force_dtw([0, 0, 1], [0, 1, 1])
        assert dtw_distance([0, 0, 1], [0, 1, 1]) == 0.0

    def test_shift_beats_euclidean(self):
        """Warping absorbs a time shift that pointwise distance cannot."""
        t = np.linspace(0, 4 * np.pi, 64)
        a, b = np.sin(t), np.sin(t + 0.5)
        assert dtw_distance(a, b) < np.abs(a - b).sum()

    def test_matches_brute_force_on_random_pairs(self):
        """Exact agreement (not approximate) with the reference DP."""
        rng = np.random.default_rng(42)
        for _ in range(100):
            la, lb = rng.integers(1, 33, size=2)
            a = rng.normal(size=la)
            b = rng.normal(size=lb)
            assert dtw_distance(a, b) == brute_force_dtw(a, b)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.normal(size=rng.integers(2, 20))
            b = rng.normal(size=rng.integers(2, 20))
            assert dtw_distance(a, b) == dtw_distance(b, a)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            dtw_distance([], [1.0])


class TestMatrixAndAffinity:
    def test_matrix_is_symmetric_zero_diagonal(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(5, 30))
        dist = dtw_distance_matrix(values)
        np.testing.assert_array_equal(dist, dist.T)
        np.testing.assert_array_equal(np.diag(dist), 0.0)

    def test_identical_pair_affinity_one(self):
        values = np.vstack([np.sin(np.linspace(0, 3, 20))] * 2
                           + [np.cos(np.linspace(0, 3, 20))])
        affinity, _ = dtw_affinity(dtw_distance_matrix(values))
        assert affinity[0, 1] == 1.0

    def test_affinity_in_unit_interval(self):
        rng = np.random.default_rng(1)
        affinity, sigma = dtw_affinity(dtw_distance_matrix(rng.normal(size=(6, 25))))
        assert sigma > 0
        assert affinity.min() >= 0.0
        assert affinity.max() <= 1.0
        np.testing.assert_array_equal(np.diag(affinity), 1.0)

    def test_single_variable(self):
        affinity, sigma = dtw_affinity(np.zeros((1, 1)))
        np.testing.assert_array_equal(affinity, [[1.0]])
        assert sigma == 0.0

    def test_all_identical_degenerates_to_indicator(self):
        dist = np.zeros((3, 3))
        affinity, sigma = dtw_affinity(dist)
        assert sigma == 0.0
        np.testing.assert_array_equal(affinity, np.ones((3, 3)))

    def test_median_bandwidth(self):
        """sigma is the median of strictly-upper-triangle distances."""
        dist = np.array([[0, 1, 2], [1, 0, 4], [2, 4, 0]], dtype=float)
        affinity, sigma = dtw_affinity(dist)
        assert sigma == 2.0
        assert affinity[0, 1] == pytest.approx(np.exp(-0.25))


class TestCache:
    def test_cache_hit_short_circuits(self, tmp_path):
        rng = np.random.default_rng(2)
        values = rng.normal(size=(4, 20))
        first = compute_dtw_adjacency(values, cache_dir=tmp_path)
        bins = list(tmp_path.glob("dtw_*.bin"))
        assert len(bins) == 1
        # poison the cached payload; a hit must return the poisoned bytes
        poisoned = np.full_like(first, 0.123)
        bins[0].write_bytes(np.ascontiguousarray(poisoned, dtype="<f8").tobytes())
        second = compute_dtw_adjacency(values, cache_dir=tmp_path)
        np.testing.assert_array_equal(second, poisoned)

    def test_different_data_different_key(self, tmp_path):
        rng = np.random.default_rng(3)
        compute_dtw_adjacency(rng.normal(size=(3, 15)), cache_dir=tmp_path)
        compute_dtw_adjacency(rng.normal(size=(3, 15)), cache_dir=tmp_path)
        assert len(list(tmp_path.glob("dtw_*.bin"))) == 2

    def test_no_cache_dir_works(self):
        values = np.random.default_rng(4).normal(size=(3, 12))
        affinity = compute_dtw_adjacency(values)
        assert affinity.shape == (3, 3)

    def test_sidecar_records_sigma(self, tmp_path):
        import json
        values = np.random.default_rng(5).normal(size=(3, 12))
        compute_dtw_adjacency(values, cache_dir=tmp_path)
        sidecar = json.loads(next(tmp_path.glob("dtw_*.json")).read_text())
        assert sidecar["sigma"] > 0
        assert sidecar["n_vars"] == 3
        assert len(sidecar["dataset_hash"]) == 64
