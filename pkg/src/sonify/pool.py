"""Batch standardization of raw recordings into the fixed-format audio pool.

Every input file is decoded, downmixed to mono, resampled to the target
rate, and cut into fixed-length chunks written as float32 WAV. The pool
manifest (JSON Lines) records provenance and a SHA-256 per chunk file;
two runs over the same inputs produce byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from . import wavio
from .audio import AudioChunk, chunk, decode_audio, downmix_to_mono, resample
from .errors import AudioDecodeError, AudioFormatError, ManifestError

log = logging.getLogger(__name__)

MANIFEST_NAME = "pool_manifest.jsonl"


@dataclass(frozen=True)
class StandardizeConfig:
    sample_rate: int = 16000
    chunk_seconds: float = 5.0
    min_clip_seconds: float = 0.1
    workers: int = 1


@dataclass(frozen=True)
class ChunkRecord:
    chunk_id: str
    source_id: str
    chunk_index: int
    pad_samples: int
    sha256: str


@dataclass(frozen=True)
class PoolResult:
    records: list[ChunkRecord]
    skipped: list[tuple[str, str]]  # (source path, reason)

    @property
    def skip_count(self) -> int:
        return len(self.skipped)


def _source_id(path: Path, root: Path) -> str:
    relative = path.relative_to(root).with_suffix("")
    return "__".join(relative.parts)


def _standardize_file(
    path: Path, root: Path, out_dir: Path, config: StandardizeConfig
) -> list[ChunkRecord]:
    clip = decode_audio(path, source_id=_source_id(path, root))
    if clip.duration < config.min_clip_seconds:
        raise AudioFormatError(
            f"degenerate clip: {clip.duration:.3f} s < {config.min_clip_seconds} s"
        )
    mono = downmix_to_mono(clip)
    standardized = resample(mono, config.sample_rate)
    records = []
    for piece in chunk(standardized, config.chunk_seconds):
        wav_path = out_dir / f"{piece.chunk_id}.wav"
        wavio.write_wav(wav_path, piece.samples, piece.sample_rate, fmt="float32")
        digest = hashlib.sha256(wav_path.read_bytes()).hexdigest()
        records.append(
            ChunkRecord(
                chunk_id=piece.chunk_id,
                source_id=piece.source_id,
                chunk_index=piece.chunk_index,
                pad_samples=piece.pad_samples,
                sha256=digest,
            )
        )
    return records


def standardize_pool(
    input_dir: str | Path, output_dir: str | Path, config: StandardizeConfig | None = None
) -> PoolResult:
    """Standardize every WAV under input_dir into chunk files plus a manifest.

    Per-file decode failures are logged and skipped, never aborting the
    batch. The manifest is sorted by (source_id, chunk_index) regardless of
    worker scheduling.
    """
    config = config or StandardizeConfig()
    root = Path(input_dir)
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() == ".wav")

    def one(path: Path) -> tuple[list[ChunkRecord], tuple[str, str] | None]:
        try:
            return _standardize_file(path, root, out_dir, config), None
        except (AudioDecodeError, AudioFormatError) as exc:
            log.warning("skipping %s: %s", path, exc)
            return [], (str(path), str(exc))

    if config.workers > 1 and len(files) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            outcomes = list(executor.map(one, files))
    else:
        outcomes = [one(path) for path in files]

    records = sorted(
        (record for recs, _ in outcomes for record in recs),
        key=lambda r: (r.source_id, r.chunk_index),
    )
    skipped = [skip for _, skip in outcomes if skip is not None]
    write_pool_manifest(out_dir / MANIFEST_NAME, records)
    return PoolResult(records=records, skipped=skipped)


def write_pool_manifest(path: str | Path, records: list[ChunkRecord]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for r in records:
            handle.write(
                json.dumps(
                    {
                        "chunk_id": r.chunk_id,
                        "source_id": r.source_id,
                        "chunk_index": r.chunk_index,
                        "pad_samples": r.pad_samples,
                        "sha256": r.sha256,
                    }
                )
                + "\n"
            )


def load_pool_manifest(path: str | Path) -> list[ChunkRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for row_num, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                records.append(
                    ChunkRecord(
                        chunk_id=raw["chunk_id"],
                        source_id=raw["source_id"],
                        chunk_index=int(raw["chunk_index"]),
                        pad_samples=int(raw["pad_samples"]),
                        sha256=raw["sha256"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{path}: bad pool manifest row {row_num}: {exc}") from exc
    return records


class ChunkStore:
    """Resolves chunk_id -> AudioChunk from a standardized pool directory.

    Decoded chunks are kept in a bounded LRU cache (`cache` entries, 0
    disables) so repeated mixes of popular chunks avoid re-decoding without
    holding a large pool in memory.
    """

    def __init__(self, pool_dir: str | Path, cache: int | bool = 0):
        self.pool_dir = Path(pool_dir)
        manifest_path = self.pool_dir / MANIFEST_NAME
        if not manifest_path.exists():
            raise ManifestError(f"no {MANIFEST_NAME} in {self.pool_dir}")
        self._records = {r.chunk_id: r for r in load_pool_manifest(manifest_path)}
        self._cache_size = 256 if cache is True else int(cache)
        self._cache: OrderedDict[str, AudioChunk] = OrderedDict()

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._records

    def __iter__(self) -> Iterator[str]:
        return iter(self._records)

    def __getitem__(self, chunk_id: str) -> AudioChunk:
        if chunk_id in self._cache:
            self._cache.move_to_end(chunk_id)
            return self._cache[chunk_id]
        try:
            record = self._records[chunk_id]
        except KeyError:
            raise KeyError(chunk_id) from None
        samples, rate = wavio.read_wav(self.pool_dir / f"{chunk_id}.wav")
        piece = AudioChunk(
            samples=samples[:, 0],
            sample_rate=rate,
            source_id=record.source_id,
            chunk_index=record.chunk_index,
            pad_samples=record.pad_samples,
        )
        if self._cache_size > 0:
            self._cache[chunk_id] = piece
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return piece
