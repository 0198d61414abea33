"""Command-line entry points for the sonification pipeline."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import wavio
from .audio import AudioChunk, decode_audio, downmix_to_mono
from .concepts import DEFAULT_SILENT_KEYWORDS, filter_silent_images, load_concepts, load_images
from .embeddings import load_embeddings
from .errors import SonifyError
from .loudness import measure_integrated_lufs, normalize_to_lufs
from .manifest import load_config, replay_manifest, run_pipeline
from .metrics import (
    ais,
    frechet_distance,
    gaussian_stats,
    iis,
    knn_loudness_study,
    l2_normalized_embedder,
    raw_signal_embedder,
)
from .pool import MANIFEST_NAME, ChunkStore, StandardizeConfig, standardize_pool
from .retrieval import RetrievalConfig, batch_retrieve


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Sonification pipeline: pair images with retrieved, mixed audio."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@main.command()
@click.option("--in", "input_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "output_dir", required=True, type=click.Path(file_okay=False))
@click.option("--rate", default=16000, show_default=True, type=int)
@click.option("--chunk-seconds", default=5.0, show_default=True, type=float)
@click.option("--workers", default=1, show_default=True, type=int)
def standardize(input_dir: str, output_dir: str, rate: int, chunk_seconds: float, workers: int) -> None:
    """Decode, downmix, resample, and chunk every WAV into the audio pool."""
    config = StandardizeConfig(sample_rate=rate, chunk_seconds=chunk_seconds, workers=workers)
    result = standardize_pool(input_dir, output_dir, config)
    click.echo(
        f"wrote {len(result.records)} chunks to {output_dir} "
        f"({result.skip_count} file(s) skipped); manifest: {Path(output_dir) / MANIFEST_NAME}"
    )


@main.group()
def lufs() -> None:
    """Integrated loudness measurement and normalization."""


def _file_as_chunk(path: str) -> AudioChunk:
    clip = downmix_to_mono(decode_audio(path))
    return AudioChunk(
        samples=clip.samples[:, 0],
        sample_rate=clip.sample_rate,
        source_id=clip.source_id,
        chunk_index=0,
        pad_samples=0,
    )


@lufs.command()
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
def measure(files: tuple[str, ...]) -> None:
    """Print one JSON row of integrated loudness per file."""
    for path in files:
        try:
            value = measure_integrated_lufs(_file_as_chunk(path))
        except SonifyError as exc:
            _fail(exc)
        click.echo(
            json.dumps(
                {
                    "path": path,
                    "lufs": None if value.is_silence else round(value.value, 4),
                    "is_silence": value.is_silence,
                }
            )
        )


@lufs.command()
@click.option("--target", default=-23.0, show_default=True, type=float)
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def normalize(target: float, file: str, output: str) -> None:
    """Normalize FILE to the target dB-LUFS and write a float32 WAV."""
    try:
        normalized, gain = normalize_to_lufs(_file_as_chunk(file), target)
    except SonifyError as exc:
        _fail(exc)
    wavio.write_wav(output, normalized.samples, normalized.sample_rate)
    click.echo(f"applied {gain.gain_db:+.2f} dB -> {output}")


@main.command()
@click.option("--pool", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--concepts", "concepts_semb", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--concept-meta", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=50, show_default=True, type=int)
@click.option("--tie-policy", default="inclusive", show_default=True,
              type=click.Choice(["inclusive", "strict"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def retrieve(pool: str, concepts_semb: str, concept_meta: str, k: int,
             tie_policy: str, seed: int, workers: int, out_path: str) -> None:
    """Match every concept to one audio chunk; write matches.jsonl."""
    try:
        pool_embs = load_embeddings(pool)
        text_embs = load_embeddings(concepts_semb)
        concept_list = load_concepts(concept_meta)
        cfg = RetrievalConfig(top_k=k, tie_policy=tie_policy, seed=seed)
        matches, failures = batch_retrieve(concept_list, text_embs, pool_embs, cfg, workers=workers)
    except SonifyError as exc:
        _fail(exc)
    with open(out_path, "w", encoding="utf-8") as handle:
        for m in matches:
            handle.write(
                json.dumps(
                    {
                        "concept_id": m.concept_id,
                        "chunk_id": m.chunk_id,
                        "raw_score": m.raw_score,
                        "ssr_score": m.ssr_score,
                        "threshold_lb": m.threshold_lb,
                        "eligible_count": m.eligible_count,
                    }
                )
                + "\n"
            )
    for failure in failures:
        click.echo(f"failed {failure.concept_id}: {failure.reason}", err=True)
    click.echo(f"{len(matches)} match(es), {len(failures)} failure(s) -> {out_path}")
    if failures and not matches:
        raise click.ClickException("no concept could be matched")


@main.command("filter")
@click.option("--images", "images_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--keywords", default=",".join(DEFAULT_SILENT_KEYWORDS), show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Write kept records here instead of stdout.")
def filter_cmd(images_path: str, keywords: str, out_path: str | None) -> None:
    """Drop images whose captions name inherently silent objects."""
    keyword_list = [kw.strip() for kw in keywords.split(",") if kw.strip()]
    try:
        records = load_images(images_path)
        kept, discarded = filter_silent_images(records, keyword_list)
    except SonifyError as exc:
        _fail(exc)
    rows = [
        json.dumps(
            {"image_id": r.image_id, "caption": r.caption, "source_tag": r.source_tag},
            ensure_ascii=False,
        )
        for r in kept
    ]
    if out_path:
        Path(out_path).write_text("\n".join(rows) + ("\n" if rows else ""), encoding="utf-8")
    else:
        for row in rows:
            click.echo(row)
    for d in discarded:
        click.echo(f"discarded {d.record.image_id} (keyword {d.keyword!r})", err=True)
    click.echo(f"kept {len(kept)}, discarded {len(discarded)}", err=True)


@main.group()
def metrics() -> None:
    """Evaluation metrics over embedding / feature files."""


@metrics.command("ais")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True, dir_okay=False))
def metrics_ais(path_a: str, path_b: str) -> None:
    """Mean cosine similarity between paired audio and image embeddings."""
    try:
        value = ais(load_embeddings(path_a), load_embeddings(path_b))
    except SonifyError as exc:
        _fail(exc)
    click.echo(f"{value:.6f}")


@metrics.command("iis")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True, dir_okay=False))
def metrics_iis(path_a: str, path_b: str) -> None:
    """Mean cosine similarity between generated and reference image embeddings."""
    try:
        value = iis(load_embeddings(path_a), load_embeddings(path_b))
    except SonifyError as exc:
        _fail(exc)
    click.echo(f"{value:.6f}")


@metrics.command("fid")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True, dir_okay=False))
def metrics_fid(path_a: str, path_b: str) -> None:
    """Frechet distance between the Gaussian stats of two feature files."""
    try:
        stats_a = gaussian_stats(load_embeddings(path_a, normalize=False))
        stats_b = gaussian_stats(load_embeddings(path_b, normalize=False))
        click.echo(f"{frechet_distance(stats_a, stats_b):.6f}")
    except SonifyError as exc:
        _fail(exc)


@main.group()
def study() -> None:
    """Empirical studies over the audio pool."""


def _parse_gain_grid(spec: str) -> list[float]:
    try:
        start, step, stop = (float(part) for part in spec.split(":"))
    except ValueError:
        raise click.ClickException(f"bad gain grid {spec!r}; expected start:step:stop") from None
    if step <= 0:
        raise click.ClickException("gain grid step must be positive")
    grid = list(np.arange(start, stop + step / 2, step))
    return [round(g, 9) for g in grid]


@study.command("loudness")
@click.option("--chunks", "chunks_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--gains", default="-30:3:6", show_default=True,
              help="Gain grid in dB as start:step:stop (inclusive).")
@click.option("--embedder", "embedder_name", default="raw", show_default=True,
              type=click.Choice(["raw", "normalized"]))
@click.option("--k", default=1, show_default=True, type=int)
@click.option("--limit", default=0, show_default=True, type=int,
              help="Use at most this many chunks (0 = all).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def study_loudness(chunks_dir: str, gains: str, embedder_name: str, k: int,
                   limit: int, out_path: str) -> None:
    """KNN self-classification accuracy as items drift from their 0 dB loudness."""
    store = ChunkStore(chunks_dir)
    ids = sorted(store)
    if limit:
        ids = ids[:limit]
    items = [store[chunk_id] for chunk_id in ids]
    embedder = raw_signal_embedder() if embedder_name == "raw" else l2_normalized_embedder()
    grid = _parse_gain_grid(gains)
    try:
        result = knn_loudness_study(items, embedder, grid, k=k)
    except SonifyError as exc:
        _fail(exc)
    payload = {"gains_db": list(result.gains_db), "accuracy": list(result.accuracy)}
    Path(out_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--replay", "replay_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Re-render an existing manifest and verify waveform hashes.")
def run(config_path: str, replay_path: str | None) -> None:
    """Run the full sonification pipeline from a TOML config."""
    try:
        config = load_config(config_path)
        if replay_path:
            outcomes = replay_manifest(
                replay_path, config.paths.pool_dir, Path(config.paths.output_dir) / "replay"
            )
            bad = [o.image_id for o in outcomes if not o.matches_stored_hash]
            click.echo(f"replayed {len(outcomes)} image(s), {len(bad)} hash mismatch(es)")
            if bad:
                raise click.ClickException(f"hash mismatch for: {', '.join(bad)}")
            return
        result = run_pipeline(config)
    except SonifyError as exc:
        _fail(exc)
    for skip in result.skips:
        click.echo(f"skipped {skip.image_id}: {skip.reason}", err=True)
    click.echo(
        f"rendered {len(result.entries)} image(s), skipped {len(result.skips)}; "
        f"manifest: {result.manifest_path}"
    )


if __name__ == "__main__":
    main()
