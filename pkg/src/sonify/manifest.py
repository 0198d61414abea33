"""End-to-end pipeline driver and the sonified-dataset manifest.

A manifest row binds one image to the audio chunks mixed into its rendered
counterpart: per-source concept, chunk, sampled target loudness, and
confidence scores, plus a content hash of the waveform so third parties can
verify a reproduction without shipping audio. Identical (inputs, seed,
config) produce byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import wavio
from .concepts import (
    DEFAULT_SILENT_KEYWORDS,
    SoundingConcept,
    filter_silent_images,
    load_concepts,
    load_images,
    select_concepts_for_image,
)
from .embeddings import load_embeddings
from .errors import ManifestError, MixerError
from .mixer import GainRange, MixEntry, MixRecipe, apply_recipe, render_pair
from .pool import ChunkStore
from .retrieval import MatchResult, RetrievalConfig, batch_retrieve
from .seeding import derive_rng

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"

_ENV_PATH_OVERRIDES = {
    "pool_dir": "SONIFY_POOL_DIR",
    "audio_embeddings": "SONIFY_AUDIO_EMBEDDINGS",
    "text_embeddings": "SONIFY_TEXT_EMBEDDINGS",
    "concepts": "SONIFY_CONCEPTS",
    "images": "SONIFY_IMAGES",
    "output_dir": "SONIFY_OUTPUT_DIR",
}


@dataclass(frozen=True)
class PipelinePaths:
    pool_dir: str
    audio_embeddings: str
    text_embeddings: str
    concepts: str
    images: str
    output_dir: str


@dataclass(frozen=True)
class PipelineConfig:
    paths: PipelinePaths
    seed: int = 0
    top_k: int = 50
    tie_policy: str = "inclusive"
    max_sources: int = 3
    gain_center: float = -23.0
    gain_half_width: float = 1.0
    keywords: tuple[str, ...] = DEFAULT_SILENT_KEYWORDS
    workers: int = 1

    def fingerprint(self) -> str:
        """Hash of the semantic knobs (paths excluded; they vary per host)."""
        payload = json.dumps(
            {
                "seed": self.seed,
                "top_k": self.top_k,
                "tie_policy": self.tie_policy,
                "max_sources": self.max_sources,
                "gain_center": self.gain_center,
                "gain_half_width": self.gain_half_width,
                "keywords": list(self.keywords),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def load_config(path: str | Path, env: dict | None = None) -> PipelineConfig:
    """Read a TOML pipeline config; environment variables override paths only."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as handle:
        raw = tomllib.load(handle)
    env = os.environ if env is None else env

    try:
        paths_raw = dict(raw["paths"])
    except KeyError:
        raise ManifestError(f"{path}: missing [paths] section") from None
    for key, var in _ENV_PATH_OVERRIDES.items():
        if var in env:
            paths_raw[key] = env[var]
    missing = [k for k in _ENV_PATH_OVERRIDES if k not in paths_raw]
    if missing:
        raise ManifestError(f"{path}: missing path(s): {', '.join(missing)}")
    base = Path(path).parent
    resolved = {k: str((base / paths_raw[k])) for k in _ENV_PATH_OVERRIDES}

    gain = raw.get("gain", {})
    filt = raw.get("filter", {})
    return PipelineConfig(
        paths=PipelinePaths(**resolved),
        seed=int(raw.get("seed", 0)),
        top_k=int(raw.get("top_k", 50)),
        tie_policy=str(raw.get("tie_policy", "inclusive")),
        max_sources=int(raw.get("max_sources", 3)),
        gain_center=float(gain.get("center", -23.0)),
        gain_half_width=float(gain.get("half_width", 1.0)),
        keywords=tuple(filt.get("keywords", DEFAULT_SILENT_KEYWORDS)),
        workers=int(raw.get("workers", 1)),
    )


@dataclass(frozen=True)
class ManifestSource:
    concept_id: str
    object: str
    chunk_id: str
    gamma_db: float
    raw_score: float
    ssr_score: float
    extractor: str = ""


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    entries: tuple[ManifestSource, ...]
    mix_hash: str
    pipeline_seed: int
    config_fingerprint: str
    clip_policy_applied: bool = False
    peak_gain_db: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.entries:
            raise ManifestError(f"image {self.image_id!r}: manifest entry with no sources")


def waveform_hash(samples: np.ndarray) -> str:
    """SHA-256 of the raw little-endian float32 sample bytes."""
    return hashlib.sha256(np.ascontiguousarray(samples, dtype="<f4").tobytes()).hexdigest()


_ROW_FIELDS = (
    "image_id",
    "entries",
    "mix_hash",
    "pipeline_seed",
    "config_fingerprint",
    "clip_policy_applied",
    "peak_gain_db",
)
_SOURCE_FIELDS = (
    "concept_id",
    "object",
    "chunk_id",
    "gamma_db",
    "raw_score",
    "ssr_score",
    "extractor",
)


def _entry_to_row(entry: ManifestEntry) -> dict:
    return {
        "image_id": entry.image_id,
        "entries": [
            {name: getattr(source, name) for name in _SOURCE_FIELDS}
            for source in entry.entries
        ],
        "mix_hash": entry.mix_hash,
        "pipeline_seed": entry.pipeline_seed,
        "config_fingerprint": entry.config_fingerprint,
        "clip_policy_applied": entry.clip_policy_applied,
        "peak_gain_db": entry.peak_gain_db,
        **entry.extra,
    }


def write_manifest(path: str | Path, entries: Sequence[ManifestEntry]) -> None:
    """Write manifest rows as JSON Lines with a stable field order."""
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(_entry_to_row(entry), ensure_ascii=False) + "\n")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read and schema-validate a manifest.

    Unknown fields are preserved with a warning (forward compatibility); a
    final line without a newline terminator is reported as truncation with
    its byte offset.
    """
    blob = Path(path).read_bytes()
    entries = []
    offset = 0
    row_num = 0
    while offset < len(blob):
        newline = blob.find(b"\n", offset)
        if newline == -1:
            raise ManifestError(f"{path}: truncated file at byte {offset}")
        line = blob[offset:newline]
        row_num += 1
        if line.strip():
            entries.append(_parse_row(line, row_num, path))
        offset = newline + 1
    return entries


def _parse_row(line: bytes, row_num: int, path: str | Path) -> ManifestEntry:
    try:
        raw = json.loads(line.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"{path}: row {row_num}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ManifestError(f"{path}: row {row_num}: not an object")
    unknown = [k for k in raw if k not in _ROW_FIELDS]
    if unknown:
        warnings.warn(f"{path}: row {row_num}: unknown field(s) preserved: {unknown}", stacklevel=2)
    try:
        sources = tuple(
            ManifestSource(**{name: src[name] for name in _SOURCE_FIELDS})
            for src in raw["entries"]
        )
        return ManifestEntry(
            image_id=raw["image_id"],
            entries=sources,
            mix_hash=raw["mix_hash"],
            pipeline_seed=int(raw["pipeline_seed"]),
            config_fingerprint=raw["config_fingerprint"],
            clip_policy_applied=bool(raw.get("clip_policy_applied", False)),
            peak_gain_db=float(raw.get("peak_gain_db", 0.0)),
            extra={k: raw[k] for k in unknown},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: row {row_num}: schema violation: {exc}") from exc


@dataclass(frozen=True)
class SkippedImage:
    image_id: str
    reason: str


@dataclass(frozen=True)
class PipelineRunResult:
    entries: list[ManifestEntry]
    skips: list[SkippedImage]
    manifest_path: Path


def run_pipeline(config: PipelineConfig) -> PipelineRunResult:
    """Filter images, retrieve a chunk per concept, render and hash each mix.

    Missing input artifacts abort; per-image failures are logged as skips
    and the rest of the batch continues.
    """
    paths = config.paths
    for label, p in (
        ("pool_dir", paths.pool_dir),
        ("audio_embeddings", paths.audio_embeddings),
        ("text_embeddings", paths.text_embeddings),
        ("concepts", paths.concepts),
        ("images", paths.images),
    ):
        if not Path(p).exists():
            raise ManifestError(f"missing input artifact: {label}: {p}")
    out_dir = Path(paths.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    images = load_images(paths.images)
    kept, discarded = filter_silent_images(images, config.keywords)
    for seen in discarded:
        log.info("filtered image %s (keyword %r)", seen.record.image_id, seen.keyword)

    all_concepts = load_concepts(paths.concepts)
    by_image: dict[str, list[SoundingConcept]] = {}
    for concept in all_concepts:
        by_image.setdefault(concept.image_id, []).append(concept)

    skips: list[SkippedImage] = []
    selected: list[tuple[str, list[SoundingConcept]]] = []
    for record in kept:
        chosen = select_concepts_for_image(
            record.image_id, by_image.get(record.image_id, []), config.max_sources, config.seed
        )
        if not chosen:
            skips.append(SkippedImage(record.image_id, "no surviving concepts"))
            log.warning("skipping image %s: no surviving concepts", record.image_id)
            continue
        selected.append((record.image_id, chosen))

    flat = [concept for _, chosen in selected for concept in chosen]
    pool_embs = load_embeddings(paths.audio_embeddings)
    text_embs = load_embeddings(paths.text_embeddings)
    retrieval_cfg = RetrievalConfig(
        top_k=config.top_k, tie_policy=config.tie_policy, seed=config.seed
    )
    matches, failures = batch_retrieve(
        flat, text_embs, pool_embs, retrieval_cfg, workers=config.workers
    )
    match_by_concept = {m.concept_id: m for m in matches}
    failure_by_concept = {f.concept_id: f.reason for f in failures}

    store = ChunkStore(paths.pool_dir, cache=True)
    gain_range = GainRange(center=config.gain_center, half_width=config.gain_half_width)
    fingerprint = config.fingerprint()
    concept_by_id = {c.concept_id: c for c in flat}

    entries: list[ManifestEntry] = []
    for image_id, chosen in selected:
        image_matches: list[MatchResult] = []
        reasons = []
        for concept in chosen:
            if concept.concept_id in match_by_concept:
                image_matches.append(match_by_concept[concept.concept_id])
            else:
                reasons.append(
                    f"{concept.concept_id}: {failure_by_concept.get(concept.concept_id, 'no match')}"
                )
        if not image_matches:
            skips.append(SkippedImage(image_id, f"retrieval failed: {'; '.join(reasons)}"))
            log.warning("skipping image %s: retrieval failed", image_id)
            continue
        rng = derive_rng(config.seed, "mix", image_id)
        try:
            recipe, mixed = render_pair(image_id, image_matches, store, rng, gain_range)
        except MixerError as exc:
            skips.append(SkippedImage(image_id, str(exc)))
            log.warning("skipping image %s: %s", image_id, exc)
            continue
        wavio.write_wav(out_dir / f"{image_id}.wav", mixed.samples, mixed.sample_rate)
        entries.append(
            ManifestEntry(
                image_id=image_id,
                entries=tuple(
                    ManifestSource(
                        concept_id=e.concept_id,
                        object=concept_by_id[e.concept_id].object,
                        chunk_id=e.chunk_id,
                        gamma_db=e.gamma_db,
                        raw_score=e.raw_score,
                        ssr_score=e.ssr_score,
                        extractor=concept_by_id[e.concept_id].extractor,
                    )
                    for e in recipe.entries
                ),
                mix_hash=waveform_hash(mixed.samples),
                pipeline_seed=config.seed,
                config_fingerprint=fingerprint,
                clip_policy_applied=recipe.clip_policy_applied,
                peak_gain_db=recipe.peak_gain_db,
            )
        )

    manifest_path = out_dir / MANIFEST_NAME
    write_manifest(manifest_path, entries)
    return PipelineRunResult(entries=entries, skips=skips, manifest_path=manifest_path)


@dataclass(frozen=True)
class ReplayOutcome:
    image_id: str
    matches_stored_hash: bool


def replay_manifest(
    manifest_path: str | Path,
    pool_dir: str | Path,
    output_dir: str | Path | None = None,
) -> list[ReplayOutcome]:
    """Re-render every manifest row from stored chunk IDs and gains.

    Returns, per image, whether the regenerated waveform hash matches the
    stored mix_hash; optionally writes the regenerated WAVs.
    """
    store = ChunkStore(pool_dir, cache=True)
    out_dir = Path(output_dir) if output_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    outcomes = []
    for entry in read_manifest(manifest_path):
        # scores are informational; only chunk_id and gamma drive the audio
        recipe = MixRecipe(
            image_id=entry.image_id,
            entries=tuple(
                MixEntry(
                    chunk_id=source.chunk_id,
                    gamma_db=source.gamma_db,
                    raw_score=source.raw_score,
                    ssr_score=source.ssr_score,
                    concept_id=source.concept_id,
                )
                for source in entry.entries
            ),
        )
        mixed = apply_recipe(recipe, store)
        if out_dir is not None:
            wavio.write_wav(out_dir / f"{entry.image_id}.wav", mixed.samples, mixed.sample_rate)
        outcomes.append(
            ReplayOutcome(
                image_id=entry.image_id,
                matches_stored_hash=waveform_hash(mixed.samples) == entry.mix_hash,
            )
        )
    return outcomes
