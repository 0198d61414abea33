"""Export jobs: run an encoder over a manifest and serialize one SEMB file."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import EncoderError, get_encoder
from .semb import write_semb
from .wav import WavError, read_float32_mono

log = logging.getLogger(__name__)


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class ExportJob:
    input_manifest: Path
    model_tag: str
    output_path: Path
    batch_size: int = 64


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for row_num, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ExportError(f"{path}: malformed JSON at row {row_num}: {exc}") from exc
    return rows


def _require_unique(ids: list[str], label: str) -> None:
    seen: set[str] = set()
    for item_id in ids:
        if item_id in seen:
            raise ExportError(f"duplicate {label} in input: {item_id!r}")
        seen.add(item_id)


def _run(job: ExportJob, items: list[tuple[str, object]], encode) -> int:
    """Encode items in batches, skip per-item failures, write atomically."""
    if not items:
        raise ExportError("nothing to export")
    ids: list[str] = []
    vectors: list[np.ndarray] = []
    skipped = 0
    for start in range(0, len(items), job.batch_size):
        for item_id, payload in items[start : start + job.batch_size]:
            try:
                vectors.append(np.asarray(encode(payload), dtype=np.float32))
                ids.append(item_id)
            except (EncoderError, WavError, OSError) as exc:
                skipped += 1
                log.warning("skipping %s: %s", item_id, exc)
        log.debug("encoded %d/%d", min(start + job.batch_size, len(items)), len(items))
    if not ids:
        raise ExportError("nothing to export: every item failed to encode")
    write_semb(job.output_path, np.stack(vectors), ids, encoder_tag=job.model_tag)
    if skipped:
        log.warning("%d item(s) skipped", skipped)
    return len(ids)


def export_audio_embeddings(job: ExportJob) -> int:
    """One embedding per pool chunk; chunk WAVs live beside the manifest.

    Returns the number of rows written. Per-chunk decode or inference
    failures are logged and skipped.
    """
    encoder = get_encoder("audio", job.model_tag)
    rows = _read_jsonl(job.input_manifest)
    chunk_ids = []
    for row in rows:
        if "chunk_id" not in row:
            raise ExportError(f"{job.input_manifest}: row without chunk_id")
        chunk_ids.append(row["chunk_id"])
    _require_unique(chunk_ids, "chunk_id")
    wav_dir = job.input_manifest.parent

    def encode(chunk_id: str) -> np.ndarray:
        samples, rate = read_float32_mono(wav_dir / f"{chunk_id}.wav")
        return encoder(samples, rate)

    return _run(job, [(cid, cid) for cid in chunk_ids], encode)


def export_text_embeddings(job: ExportJob) -> int:
    """One embedding per sounding concept, encoding "object: description"."""
    encoder = get_encoder("text", job.model_tag)
    rows = _read_jsonl(job.input_manifest)
    items = []
    for row in rows:
        missing = [f for f in ("concept_id", "object", "description") if not row.get(f)]
        if missing:
            raise ExportError(
                f"{job.input_manifest}: concept row missing {', '.join(missing)}"
            )
        items.append((row["concept_id"], f"{row['object']}: {row['description']}"))
    _require_unique([item_id for item_id, _ in items], "concept_id")
    return _run(job, items, encoder)
