"""Concept-to-audio matching: calibrated similarity with a dynamic threshold.

For one textual concept the pipeline is: cosine similarity against the whole
pool, signed square root to compress outliers, lower bound at the mean of
the top-k scores, then one uniform draw from the indices above the bound.
The eligible set shrinks when a handful of matches dominate and widens when
many near-equal candidates exist.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .concepts import SoundingConcept
from .embeddings import EmbeddingMatrix, ScoreVector, cosine_sim
from .errors import EmbeddingFormatError, RetrievalError
from .seeding import derive_rng

TiePolicy = Literal["inclusive", "strict"]

#: Tolerance under the threshold for the inclusive tie policy.
TIE_EPSILON = 1e-9


@dataclass(frozen=True)
class RetrievalConfig:
    top_k: int = 50
    tie_policy: TiePolicy = "inclusive"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise RetrievalError("top_k must be >= 1")
        if self.tie_policy not in ("inclusive", "strict"):
            raise RetrievalError(f"unknown tie_policy: {self.tie_policy!r}")


@dataclass(frozen=True)
class MatchResult:
    """One sampled match plus the intermediates that produced it."""

    concept_id: str
    chunk_id: str
    raw_score: float
    ssr_score: float
    threshold_lb: float
    eligible_count: int


@dataclass(frozen=True)
class RetrievalFailure:
    concept_id: str
    reason: str


def ssr(scores: ScoreVector) -> ScoreVector:
    """Signed square root, elementwise: sign(t) * sqrt(|t|), in float64."""
    t = np.asarray(scores.scores, dtype=np.float64)
    return ScoreVector(scores=np.sign(t) * np.sqrt(np.abs(t)), query_id=scores.query_id)


def dynamic_threshold(ssr_scores: ScoreVector, k: int) -> float:
    """Mean of the k largest scores (all of them when k exceeds the pool)."""
    if k < 1:
        raise RetrievalError("k must be >= 1")
    t = ssr_scores.scores
    if t.size == 0:
        raise RetrievalError("empty pool")
    if k >= t.size:
        return float(np.mean(t, dtype=np.float64))
    top = np.partition(t, t.size - k)[t.size - k :]
    return float(np.mean(top, dtype=np.float64))


def eligible_set(
    ssr_scores: ScoreVector, lb: float, tie_policy: TiePolicy = "inclusive"
) -> np.ndarray:
    """Pool indices whose score passes the bound, ascending.

    strict keeps scores > lb exactly; inclusive keeps scores >= lb - epsilon
    and therefore always contains the argmax of a non-empty pool.
    """
    t = ssr_scores.scores
    if tie_policy == "strict":
        idx = np.flatnonzero(t > lb)
        if idx.size == 0:
            raise RetrievalError("degenerate tie at threshold: empty eligible set")
    elif tie_policy == "inclusive":
        idx = np.flatnonzero(t >= lb - TIE_EPSILON)
    else:
        raise RetrievalError(f"unknown tie_policy: {tie_policy!r}")
    return idx


def get_matched_audio(
    concept: SoundingConcept,
    text_emb: np.ndarray,
    pool: EmbeddingMatrix,
    cfg: RetrievalConfig,
    rng: np.random.Generator,
) -> MatchResult:
    """Match one concept to one pool chunk; deterministic given the rng state."""
    raw = cosine_sim(text_emb, pool, query_id=concept.concept_id)
    calibrated = ssr(raw)
    lb = dynamic_threshold(calibrated, cfg.top_k)
    eligible = eligible_set(calibrated, lb, cfg.tie_policy)
    pick = int(eligible[rng.integers(eligible.size)])
    return MatchResult(
        concept_id=concept.concept_id,
        chunk_id=pool.ids[pick],
        raw_score=float(raw.scores[pick]),
        ssr_score=float(calibrated.scores[pick]),
        threshold_lb=lb,
        eligible_count=int(eligible.size),
    )


def batch_retrieve(
    concepts: Sequence[SoundingConcept],
    text_embs: EmbeddingMatrix,
    pool: EmbeddingMatrix,
    cfg: RetrievalConfig,
    workers: int = 1,
) -> tuple[list[MatchResult], list[RetrievalFailure]]:
    """Match every concept independently; failures never abort the batch.

    Each concept draws from an RNG stream keyed by (seed, ordinal), so the
    result list is identical for any worker count, ordered by input ordinal.
    """

    def one(ordinal: int) -> MatchResult | RetrievalFailure:
        concept = concepts[ordinal]
        rng = derive_rng(cfg.seed, "retrieve", ordinal)
        try:
            text_emb = text_embs.row(concept.concept_id)
            return get_matched_audio(concept, text_emb, pool, cfg, rng)
        except (RetrievalError, EmbeddingFormatError) as exc:
            return RetrievalFailure(concept_id=concept.concept_id, reason=str(exc))

    if workers > 1 and len(concepts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            outcomes = list(pool_exec.map(one, range(len(concepts))))
    else:
        outcomes = [one(n) for n in range(len(concepts))]

    results = [o for o in outcomes if isinstance(o, MatchResult)]
    failures = [o for o in outcomes if isinstance(o, RetrievalFailure)]
    return results, failures
