import numpy as np
import pytest

from conftest import make_blobs
from rcclust.kmeans import KmeansConfig, kmeans_fit, kmeanspp_seed, write_restart_report
from rcclust.metrics import ami


def _row_index(X, center):
    return int(np.flatnonzero(np.all(X == center, axis=1))[0])


class TestSeeding:
    def test_single_center_is_a_row(self):
        X = np.random.default_rng(0).standard_normal((9, 3))
        centers = kmeanspp_seed(X, 1, np.random.default_rng(4))
        assert any(np.array_equal(centers[0], row) for row in X)

    def test_k_equals_n_picks_every_row(self):
        X = np.random.default_rng(1).standard_normal((8, 2))
        for seed in range(20):
            centers = kmeanspp_seed(X, 8, np.random.default_rng(seed))
            assert sorted(_row_index(X, c) for c in centers) == list(range(8))

    def test_far_points_all_selected(self):
        X = np.array([[0.0, 0.0], [1e6, 0.0], [0.0, 1e6]])
        for seed in range(100):
            centers = kmeanspp_seed(X, 3, np.random.default_rng(seed))
            assert sorted(_row_index(X, c) for c in centers) == [0, 1, 2]

    def test_d2_sampling_frequencies(self):
        # 1-D points 0, 1, 3: after picking i, j follows d(i, j)^2 / sum
        X = np.array([[0.0], [1.0], [3.0]])
        d2 = (X - X.T) ** 2
        expected = np.full((3, 1), 1 / 3) * d2 / d2.sum(axis=1, keepdims=True)
        runs = 30_000
        rng = np.random.default_rng(123)
        counts = np.zeros((3, 3))
        for _ in range(runs):
            c = kmeanspp_seed(X, 2, rng)
            counts[_row_index(X, c[0]), _row_index(X, c[1])] += 1
        freq = counts / runs
        stderr = np.sqrt(expected * (1 - expected) / runs)
        assert np.all(np.abs(freq - expected) <= 4 * stderr + 1e-12)

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            kmeanspp_seed(np.zeros((2, 2)), 3, np.random.default_rng(0))


class TestKmeansFit:
    def test_k_one_closed_form(self):
        X = np.random.default_rng(2).standard_normal((25, 4))
        result = kmeans_fit(X, KmeansConfig(k=1, n_init=2))
        np.testing.assert_allclose(result.metadata["centers"][0], X.mean(axis=0), atol=1e-12)
        total = np.sum((X - X.mean(axis=0)) ** 2)
        assert result.metadata["inertia"] == pytest.approx(total, rel=1e-12)

    def test_two_blobs(self):
        X, y = make_blobs(n_blobs=2, seed=3)
        result = kmeans_fit(X, KmeansConfig(k=2, seed=0))
        assert ami(y, result.labels) >= 0.95

    def test_lloyd_monotone_and_fixed_point(self):
        X = np.random.default_rng(4).standard_normal((300, 3))
        result = kmeans_fit(X, KmeansConfig(k=6, n_init=3, seed=11))
        history = np.array(result.metadata["inertia_history"])
        assert np.all(np.diff(history) <= 1e-9 * history[:-1])
        centers = result.metadata["centers"]
        for j in range(6):
            np.testing.assert_allclose(centers[j], X[result.labels == j].mean(axis=0), atol=1e-9)
        d2 = ((X[:, None] - centers[None]) ** 2).sum(-1)
        assert result.metadata["inertia"] == pytest.approx(d2.min(axis=1).sum(), rel=1e-12)

    def test_best_restart_has_lowest_inertia(self):
        X = np.random.default_rng(5).standard_normal((120, 2))
        result = kmeans_fit(X, KmeansConfig(k=5, n_init=6, seed=2))
        inertias = [r["inertia"] for r in result.metadata["restarts"]]
        assert result.metadata["best_restart"] == int(np.argmin(inertias))
        assert [r["seed"] for r in result.metadata["restarts"]] == list(range(2, 8))

    def test_same_seed_same_labels(self):
        X = np.random.default_rng(6).standard_normal((80, 3))
        a = kmeans_fit(X, KmeansConfig(k=4, seed=9))
        b = kmeans_fit(X, KmeansConfig(k=4, seed=9))
        assert np.array_equal(a.labels, b.labels)

    def test_duplicate_rows_do_not_crash(self):
        X = np.vstack([np.zeros((5, 2)), np.ones((5, 2))])
        result = kmeans_fit(X, KmeansConfig(k=3, n_init=2))
        assert result.metadata["inertia"] == pytest.approx(0.0)

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((2, 2)), KmeansConfig(k=3))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            KmeansConfig(k=0)
        with pytest.raises(ValueError):
            KmeansConfig(k=2, n_init=0)

    def test_restart_report(self, tmp_path):
        import json

        X = np.random.default_rng(7).standard_normal((20, 2))
        result = kmeans_fit(X, KmeansConfig(k=2, n_init=3))
        write_restart_report(result, tmp_path / "r.json")
        report = json.loads((tmp_path / "r.json").read_text())
        assert len(report["restarts"]) == 3
        assert report["inertia"] == result.metadata["inertia"]
