import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonify.embeddings import EmbeddingMatrix
from sonify.errors import MetricsError
from sonify.metrics import (
    GaussianStats,
    ais,
    frechet_distance,
    gaussian_stats,
    iis,
    knn_loudness_study,
    l2_normalized_embedder,
    raw_signal_embedder,
)

from conftest import make_chunk, unit_rows


def _em(data, ids=None) -> EmbeddingMatrix:
    arr = np.asarray(data, dtype=np.float32)
    return EmbeddingMatrix(arr, ids or [f"id{i}" for i in range(arr.shape[0])])


class TestPairedSimilarity:
    def test_identical_matrices_score_one(self):
        m = _em(unit_rows(5, 8, seed=0))
        assert ais(m, m) == pytest.approx(1.0, abs=1e-6)

    def test_pairwise_orthogonal_is_zero(self):
        a = _em([[1, 0, 0], [0, 1, 0]])
        b = _em([[0, 1, 0], [0, 0, 1]])
        assert ais(a, b) == pytest.approx(0.0, abs=1e-7)

    def test_hand_mean(self):
        a = _em([[1, 0], [1, 0]])
        b = _em([[1, 0], [0, 1]])
        assert ais(a, b) == pytest.approx(0.5, abs=1e-7)
        assert iis(a, b) == pytest.approx(0.5, abs=1e-7)

    def test_alignment_by_id(self):
        a = _em([[1, 0], [0, 1]], ids=["x", "y"])
        b = _em([[0, 1], [1, 0]], ids=["y", "x"])  # same vectors, swapped rows
        assert ais(a, b) == pytest.approx(1.0, abs=1e-6)

    def test_id_misalignment(self):
        a = _em([[1, 0]], ids=["x"])
        b = _em([[1, 0]], ids=["z"])
        with pytest.raises(MetricsError, match="ID misalignment"):
            ais(a, b)

    def test_dim_mismatch(self):
        with pytest.raises(MetricsError, match="dim"):
            ais(_em([[1, 0]]), _em([[1, 0, 0]]))

    def test_invariant_to_positive_rescaling(self):
        rows = unit_rows(4, 6, seed=2)
        a = _em(rows)
        scaled = _em(rows * np.array([2.0, 0.5, 7.0, 1.3], dtype=np.float32)[:, None])
        assert ais(a, scaled) == pytest.approx(1.0, abs=1e-6)


class TestGaussianStats:
    def test_hand_covariance(self):
        stats = gaussian_stats(np.array([[0.0, 0.0], [2.0, 0.0]]))
        np.testing.assert_allclose(stats.mean, [1.0, 0.0])
        np.testing.assert_allclose(stats.cov, [[2.0, 0.0], [0.0, 0.0]])
        assert stats.n == 2

    def test_identical_rows_zero_cov(self):
        stats = gaussian_stats(np.tile([1.0, 2.0, 3.0], (5, 1)))
        np.testing.assert_allclose(stats.cov, 0.0, atol=1e-12)

    def test_single_row_errors(self):
        with pytest.raises(MetricsError, match="at least 2"):
            gaussian_stats(np.array([[1.0, 2.0]]))

    def test_accepts_embedding_matrix(self):
        m = _em(unit_rows(10, 4, seed=1))
        assert gaussian_stats(m).n == 10


def _stats_1d(mu: float, var: float) -> GaussianStats:
    return GaussianStats(mean=np.array([mu]), cov=np.array([[var]]), n=10)


class TestFrechet:
    def test_identical_stats_zero(self):
        stats = gaussian_stats(np.random.default_rng(0).standard_normal((50, 6)))
        assert frechet_distance(stats, stats) <= 1e-8

    def test_scalar_closed_form_example(self):
        # (mu, var) pairs (0, 1) and (3, 4): 3^2 + (1 - 2)^2 = 10
        assert frechet_distance(_stats_1d(0, 1), _stats_1d(3, 4)) == pytest.approx(10.0, abs=1e-8)

    @given(
        st.floats(-5, 5), st.floats(0.01, 9), st.floats(-5, 5), st.floats(0.01, 9)
    )
    @settings(max_examples=100, deadline=None)
    def test_scalar_closed_form_random(self, mu1, v1, mu2, v2):
        expected = (mu1 - mu2) ** 2 + (math.sqrt(v1) - math.sqrt(v2)) ** 2
        got = frechet_distance(_stats_1d(mu1, v1), _stats_1d(mu2, v2))
        assert got == pytest.approx(expected, abs=1e-8)

    def test_diagonal_closed_form(self):
        rng = np.random.default_rng(4)
        d = 16
        mu1, mu2 = rng.standard_normal(d), rng.standard_normal(d)
        v1, v2 = rng.uniform(0.1, 4.0, d), rng.uniform(0.1, 4.0, d)
        a = GaussianStats(mean=mu1, cov=np.diag(v1), n=10)
        b = GaussianStats(mean=mu2, cov=np.diag(v2), n=10)
        expected = np.sum((mu1 - mu2) ** 2) + np.sum((np.sqrt(v1) - np.sqrt(v2)) ** 2)
        assert frechet_distance(a, b) == pytest.approx(expected, abs=1e-6)

    def test_symmetric(self):
        rng = np.random.default_rng(7)
        a = gaussian_stats(rng.standard_normal((40, 5)))
        b = gaussian_stats(rng.standard_normal((40, 5)) * 1.5 + 0.3)
        assert frechet_distance(a, b) == pytest.approx(frechet_distance(b, a), abs=1e-6)

    def test_commuting_covariances_analytic(self):
        # covariances sharing an eigenbasis commute; closed form applies
        rng = np.random.default_rng(8)
        d = 6
        basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
        e1, e2 = rng.uniform(0.2, 3.0, d), rng.uniform(0.2, 3.0, d)
        cov1 = basis @ np.diag(e1) @ basis.T
        cov2 = basis @ np.diag(e2) @ basis.T
        mu1, mu2 = rng.standard_normal(d), rng.standard_normal(d)
        a = GaussianStats(mean=mu1, cov=(cov1 + cov1.T) / 2, n=10)
        b = GaussianStats(mean=mu2, cov=(cov2 + cov2.T) / 2, n=10)
        sqrt_diff = basis @ np.diag(np.sqrt(e1) - np.sqrt(e2)) @ basis.T
        expected = np.sum((mu1 - mu2) ** 2) + np.sum(sqrt_diff**2)
        assert frechet_distance(a, b) == pytest.approx(expected, abs=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(MetricsError, match="dim"):
            frechet_distance(_stats_1d(0, 1), gaussian_stats(np.eye(3)))

    def test_never_negative(self):
        rng = np.random.default_rng(9)
        features = rng.standard_normal((30, 8))
        a = gaussian_stats(features)
        b = gaussian_stats(features + rng.standard_normal((30, 8)) * 1e-6)
        assert frechet_distance(a, b) >= 0.0


def _structured_items(seed: int, n_pairs: int = 10):
    """Pairs (x, r*x) in disjoint sample positions; scaling one by r lands on
    the other, so self-identification decays as gain approaches each ratio."""
    rng = np.random.default_rng(seed)
    ratios_db = rng.permutation(np.linspace(5.0, 50.0, n_pairs))
    items = []
    for p in range(n_pairs):
        base = np.zeros(256, dtype=np.float32)
        base[p] = rng.uniform(0.001, 0.002)
        scale = 10 ** (ratios_db[p] / 20)
        partner = (base * scale).astype(np.float32)
        for vec in (base, partner):
            samples = np.zeros(80000, dtype=np.float32)
            samples[:256] = vec
            samples[256] = 1e-4  # keep the pad-free chunk non-degenerate
            items.append(make_chunk(samples, source_id=f"item{len(items)}"))
    return items


class TestKnnLoudnessStudy:
    def test_zero_gain_is_perfect(self):
        items = _structured_items(0)
        result = knn_loudness_study(items, raw_signal_embedder(), [0.0])
        assert result.accuracy == (1.0,)

    def test_loudness_invariant_embedder_stays_perfect(self):
        # distinct directions (one-hot at distinct positions, varied norms)
        rng = np.random.default_rng(1)
        items = []
        for p in range(10):
            samples = np.zeros(80000, dtype=np.float32)
            samples[p] = rng.uniform(0.001, 0.5)
            items.append(make_chunk(samples, source_id=f"u{p}"))
        grid = [-30.0, -12.0, 0.0, 12.0, 30.0]
        result = knn_loudness_study(items, l2_normalized_embedder(), grid)
        assert result.accuracy == (1.0,) * len(grid)

    def test_crafted_collinear_pair_decays(self):
        # two collinear items 6 dB apart: +6 dB moves A exactly onto B
        a = np.zeros(80000, dtype=np.float32)
        a[0] = 0.01
        b = np.zeros(80000, dtype=np.float32)
        b[0] = 0.01 * 10 ** (6 / 20)
        items = [make_chunk(a, source_id="a"), make_chunk(b, source_id="b")]
        result = knn_loudness_study(items, raw_signal_embedder(), [0.0, 6.0])
        assert result.accuracy[0] == 1.0
        assert result.accuracy[1] < 1.0

    def test_raw_embedder_weakly_non_increasing(self):
        grid = list(np.arange(0.0, 33.0, 3.0))
        passes = 0
        for seed in range(20):
            result = knn_loudness_study(_structured_items(seed), raw_signal_embedder(), grid)
            acc = result.accuracy
            assert acc[0] == 1.0
            if all(acc[i + 1] <= acc[i] + 1e-12 for i in range(len(acc) - 1)):
                passes += 1
        assert passes > 10  # majority of seeded trials

    def test_non_deterministic_embedder_detected(self):
        state = {"n": 0}

        def flaky(chunk):
            state["n"] += 1
            return np.full(4, float(state["n"]))

        with pytest.raises(MetricsError, match="non-deterministic"):
            knn_loudness_study(_structured_items(2)[:3], flaky, [0.0])

    def test_empty_items(self):
        with pytest.raises(MetricsError, match="empty"):
            knn_loudness_study([], raw_signal_embedder(), [0.0])
