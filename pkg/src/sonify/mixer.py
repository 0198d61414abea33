"""Per-source loudness normalization and time-domain summation into one mix."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .audio import AudioChunk
from .errors import LoudnessError, MixerError
from .loudness import GainResult, measure_integrated_lufs, normalize_to_lufs
from .retrieval import MatchResult

log = logging.getLogger(__name__)

#: Post-sum peaks are rescaled to this ceiling when the mix would clip.
CLIP_CEILING = 0.99


@dataclass(frozen=True)
class GainRange:
    """Uniform dB-LUFS range the per-source target loudness is drawn from."""

    center: float = -23.0
    half_width: float = 1.0

    def __post_init__(self) -> None:
        if self.half_width < 0:
            raise MixerError("half_width must be >= 0")
        if self.center > -10.0:
            warnings.warn(
                f"gain center {self.center} dB-LUFS is unusually hot; "
                "multi-source mixes are likely to clip",
                stacklevel=2,
            )


@dataclass(frozen=True)
class MixEntry:
    chunk_id: str
    gamma_db: float
    raw_score: float = 0.0
    ssr_score: float = 0.0
    concept_id: str = ""


@dataclass(frozen=True)
class MixRecipe:
    """Everything needed to re-render one image's audio bit-exactly."""

    image_id: str
    entries: tuple[MixEntry, ...]
    clip_policy_applied: bool = False
    peak_gain_db: float = 0.0


@dataclass(frozen=True)
class MixStats:
    gains: tuple[GainResult, ...]
    clip_policy_applied: bool
    peak_gain_db: float


def sample_gain(rng: np.random.Generator, gain_range: GainRange) -> float:
    """One uniform draw from [center - half_width, center + half_width]."""
    return float(
        rng.uniform(
            gain_range.center - gain_range.half_width,
            gain_range.center + gain_range.half_width,
        )
    )


def mix(chunks: Sequence[AudioChunk], gammas: Sequence[float]) -> tuple[AudioChunk, MixStats]:
    """Normalize each chunk to its target loudness, then sum in the time domain.

    If the sum exceeds full scale anywhere, the whole mix is rescaled so the
    peak sits at 0.99 (a global gain, preserving waveform shape) and the
    applied gain is reported in the stats.
    """
    if not chunks:
        raise MixerError("nothing to mix")
    if len(chunks) != len(gammas):
        raise MixerError(f"{len(chunks)} chunks but {len(gammas)} gains")
    length, rate = len(chunks[0].samples), chunks[0].sample_rate
    for c in chunks[1:]:
        if len(c.samples) != length or c.sample_rate != rate:
            raise MixerError("chunks must share length and sample rate")

    gains = []
    acc = np.zeros(length, dtype=np.float64)
    for c, gamma in zip(chunks, gammas):
        try:
            normalized, gain = normalize_to_lufs(c, gamma)
        except LoudnessError as exc:
            raise MixerError(f"silent source {c.chunk_id!r}") from exc
        gains.append(gain)
        acc += normalized.samples

    peak = float(np.max(np.abs(acc)))
    clipped = peak > 1.0
    peak_gain_db = 0.0
    if clipped:
        scale = CLIP_CEILING / peak
        acc *= scale
        peak_gain_db = float(20.0 * np.log10(scale))

    shared_pad = min(c.pad_samples for c in chunks)
    out = AudioChunk(
        samples=acc.astype(np.float32),
        sample_rate=rate,
        source_id=chunks[0].source_id if len(chunks) == 1 else "mix",
        chunk_index=0,
        pad_samples=shared_pad,
    )
    return out, MixStats(
        gains=tuple(gains), clip_policy_applied=clipped, peak_gain_db=peak_gain_db
    )


def apply_recipe(recipe: MixRecipe, chunk_store: Mapping[str, AudioChunk]) -> AudioChunk:
    """Re-render a stored recipe; output is byte-identical given the same chunks."""
    chunks = []
    for entry in recipe.entries:
        try:
            chunks.append(chunk_store[entry.chunk_id])
        except KeyError:
            raise MixerError(f"unresolvable chunk_id {entry.chunk_id!r}") from None
    mixed, _ = mix(chunks, [entry.gamma_db for entry in recipe.entries])
    return mixed


def render_pair(
    image_id: str,
    matches: Sequence[MatchResult],
    chunk_store: Mapping[str, AudioChunk],
    rng: np.random.Generator,
    gain_range: GainRange,
) -> tuple[MixRecipe, AudioChunk]:
    """Sample one target loudness per match and mix the matched chunks.

    Unmeasurable (silent) sources are dropped with a warning; the render
    fails only when every source is silent or a chunk cannot be resolved.
    """
    if not matches:
        raise MixerError(f"image {image_id!r}: no matches to render")

    usable: list[tuple[MatchResult, AudioChunk]] = []
    for match in matches:
        try:
            chunk = chunk_store[match.chunk_id]
        except KeyError:
            raise MixerError(f"unresolvable chunk_id {match.chunk_id!r}") from None
        usable.append((match, chunk))

    entries = []
    chunks = []
    for match, chunk in usable:
        if measure_integrated_lufs(chunk).is_silence:
            log.warning("image %s: dropping silent source %s", image_id, match.chunk_id)
            continue
        gamma = sample_gain(rng, gain_range)
        entries.append(
            MixEntry(
                chunk_id=match.chunk_id,
                gamma_db=gamma,
                raw_score=match.raw_score,
                ssr_score=match.ssr_score,
                concept_id=match.concept_id,
            )
        )
        chunks.append(chunk)
    if not entries:
        raise MixerError(f"image {image_id!r}: all sources are silent")

    mixed, stats = mix(chunks, [entry.gamma_db for entry in entries])
    recipe = MixRecipe(
        image_id=image_id,
        entries=tuple(entries),
        clip_policy_applied=stats.clip_policy_applied,
        peak_gain_db=stats.peak_gain_db,
    )
    return recipe, mixed
