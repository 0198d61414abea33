"""Evaluation toolkit: paired-embedding similarity, Fréchet distance, and
the KNN study of how much loudness information an embedder retains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .audio import AudioChunk
from .embeddings import EmbeddingMatrix
from .errors import MetricsError


def _paired_rows(a: EmbeddingMatrix, b: EmbeddingMatrix) -> tuple[np.ndarray, np.ndarray]:
    if a.dim != b.dim:
        raise MetricsError(f"dim mismatch: {a.dim} != {b.dim}")
    if a.rows != b.rows:
        raise MetricsError(f"row count mismatch: {a.rows} != {b.rows}")
    if a.ids == b.ids:
        return a.data, b.data
    if set(a.ids) != set(b.ids):
        raise MetricsError("ID misalignment: matrices do not cover the same IDs")
    order = [b.index_of(rid) for rid in a.ids]
    return a.data, b.data[order]


def _mean_pairwise_cosine(a: EmbeddingMatrix, b: EmbeddingMatrix) -> float:
    rows_a, rows_b = _paired_rows(a, b)
    rows_a = rows_a.astype(np.float64)
    rows_b = rows_b.astype(np.float64)
    norms_a = np.linalg.norm(rows_a, axis=1)
    norms_b = np.linalg.norm(rows_b, axis=1)
    if np.any(norms_a == 0) or np.any(norms_b == 0):
        raise MetricsError("zero-norm row")
    cosines = np.sum(rows_a * rows_b, axis=1) / (norms_a * norms_b)
    return float(np.mean(cosines))


def ais(audio_embs: EmbeddingMatrix, image_embs: EmbeddingMatrix) -> float:
    """Mean cosine similarity between ID-aligned audio/image embedding pairs."""
    return _mean_pairwise_cosine(audio_embs, image_embs)


def iis(gen_embs: EmbeddingMatrix, gt_embs: EmbeddingMatrix) -> float:
    """Mean cosine similarity between generated and reference image embeddings."""
    return _mean_pairwise_cosine(gen_embs, gt_embs)


@dataclass(frozen=True)
class GaussianStats:
    """Sample mean and covariance summarizing one feature distribution."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    def __post_init__(self) -> None:
        if self.mean.ndim != 1 or self.cov.shape != (self.mean.size, self.mean.size):
            raise MetricsError("mean must be (D,) and cov (D, D)")
        if self.n < 2:
            raise MetricsError("need at least 2 samples")
        if not (np.isfinite(self.mean).all() and np.isfinite(self.cov).all()):
            raise MetricsError("non-finite statistics")
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-6:
            raise MetricsError("covariance not symmetric")


def gaussian_stats(features: EmbeddingMatrix | np.ndarray) -> GaussianStats:
    """Sample mean and unbiased covariance of a feature matrix."""
    data = features.data if isinstance(features, EmbeddingMatrix) else np.asarray(features)
    if data.ndim != 2:
        raise MetricsError("features must be 2-D")
    if data.shape[0] < 2:
        raise MetricsError(f"need at least 2 samples, got {data.shape[0]}")
    data = data.astype(np.float64)
    mean = data.mean(axis=0)
    cov = np.cov(data, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    return GaussianStats(mean=mean, cov=(cov + cov.T) / 2.0, n=data.shape[0])


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition, eigenvalues floored at 0."""
    eigvals, eigvecs = scipy.linalg.eigh((matrix + matrix.T) / 2.0)
    eigvals = np.maximum(eigvals, 0.0)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Fréchet distance between two Gaussians:
    ||mu_a - mu_b||^2 + Tr(cov_a + cov_b - 2 (cov_a cov_b)^(1/2)).

    Tr((cov_a cov_b)^(1/2)) is computed through the symmetric similar matrix
    sqrt(cov_a) cov_b sqrt(cov_a), whose eigenvalues are floored at zero, so
    no complex arithmetic ever appears. The result is floored at 0.
    """
    if a.mean.size != b.mean.size:
        raise MetricsError(f"dim mismatch: {a.mean.size} != {b.mean.size}")
    delta = a.mean - b.mean
    root_a = _sqrt_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    eigvals = scipy.linalg.eigvalsh((inner + inner.T) / 2.0)
    trace_sqrt = float(np.sum(np.sqrt(np.maximum(eigvals, 0.0))))
    dist = float(delta @ delta + np.trace(a.cov) + np.trace(b.cov) - 2.0 * trace_sqrt)
    return max(dist, 0.0)


Embedder = Callable[[AudioChunk], np.ndarray]


@dataclass(frozen=True)
class LoudnessStudyResult:
    gains_db: tuple[float, ...]
    accuracy: tuple[float, ...]


def raw_signal_embedder(n_samples: int = 256) -> Embedder:
    """Embedder that returns the first n samples verbatim (a linear map)."""

    def embed(chunk: AudioChunk) -> np.ndarray:
        return chunk.samples[:n_samples].astype(np.float64)

    return embed


def l2_normalized_embedder(n_samples: int = 256) -> Embedder:
    """Loudness-invariant variant: same slice, L2-normalized."""
    base = raw_signal_embedder(n_samples)

    def embed(chunk: AudioChunk) -> np.ndarray:
        vec = base(chunk)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise MetricsError("cannot embed a silent item")
        return vec / norm

    return embed


def _scaled(chunk: AudioChunk, gain_db: float) -> AudioChunk:
    scale = 10.0 ** (gain_db / 20.0)
    return AudioChunk(
        samples=(chunk.samples * scale).astype(np.float32),
        sample_rate=chunk.sample_rate,
        source_id=chunk.source_id,
        chunk_index=chunk.chunk_index,
        pad_samples=chunk.pad_samples,
    )


def knn_loudness_study(
    items: Sequence[AudioChunk],
    embedder: Embedder,
    gains_db: Sequence[float],
    k: int = 1,
) -> LoudnessStudyResult:
    """How well items remain identifiable as their own class under gain shifts.

    Each item is its own class; references are embeddings at 0 dB. For each
    gain the items are rescaled by 10^(g/20), re-embedded, and classified by
    the k nearest references (Euclidean, majority vote, nearest breaks
    ties). Accuracy is the fraction classified as themselves.
    """
    if not items:
        raise MetricsError("empty item set")
    if k < 1:
        raise MetricsError("k must be >= 1")

    refs = np.stack([np.asarray(embedder(item), dtype=np.float64) for item in items])
    again = np.stack([np.asarray(embedder(item), dtype=np.float64) for item in items])
    if not np.array_equal(refs, again):
        raise MetricsError("non-deterministic embedder: two calls disagree")

    k = min(k, len(items))
    accuracies = []
    for gain in gains_db:
        queries = np.stack(
            [np.asarray(embedder(_scaled(item, gain)), dtype=np.float64) for item in items]
        )
        # squared Euclidean distances, queries x references
        d2 = (
            np.sum(queries**2, axis=1)[:, None]
            - 2.0 * queries @ refs.T
            + np.sum(refs**2, axis=1)[None, :]
        )
        hits = 0
        for i in range(len(items)):
            order = np.argsort(d2[i], kind="stable")
            neighbors = order[:k]
            votes = np.bincount(neighbors, minlength=len(items))
            best = np.flatnonzero(votes == votes.max())
            label = best[0] if len(best) == 1 else next(n for n in order if n in set(best))
            hits += int(label == i)
        accuracies.append(hits / len(items))
    return LoudnessStudyResult(gains_db=tuple(float(g) for g in gains_db), accuracy=tuple(accuracies))
