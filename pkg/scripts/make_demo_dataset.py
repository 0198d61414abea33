#!/usr/bin/env python3
"""Build a self-contained synthetic demo dataset and a ready-to-run config.

Generates raw recordings, standardizes them into a chunk pool, fabricates
deterministic embeddings and concept/image metadata, and writes sonify.toml,
so `sonify run --config DIR/sonify.toml` works immediately. The embeddings
are synthetic stand-ins; real runs consume encoder exports instead.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from sonify import wavio
from sonify.embeddings import EmbeddingMatrix, write_embeddings
from sonify.pool import StandardizeConfig, standardize_pool

OBJECTS = ["dog", "river", "train", "wind", "crowd", "bird", "rain", "fire", "bell", "engine"]


def unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((n, dim))
    return (rows / np.linalg.norm(rows, axis=1, keepdims=True)).astype(np.float32)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", type=Path, help="dataset directory to create")
    parser.add_argument("--images", type=int, default=10)
    parser.add_argument("--seconds-per-source", type=float, default=25.0)
    parser.add_argument("--dim", type=int, default=32)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    root = args.out
    raw_dir = root / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    for n in range(args.images):
        rate = [16000, 22050, 44100, 48000][n % 4]
        t = np.arange(round(args.seconds_per_source * rate)) / rate
        wave = 0.4 * np.sin(2 * np.pi * (150 + 85 * n) * t)
        wave += 0.08 * rng.standard_normal(len(t))
        wavio.write_wav(raw_dir / f"src{n:02d}.wav", np.clip(wave, -1, 1).astype(np.float32), rate)

    result = standardize_pool(raw_dir, root / "pool", StandardizeConfig())
    chunk_ids = [r.chunk_id for r in result.records]
    print(f"pool: {len(chunk_ids)} chunks")

    write_embeddings(
        root / "audio.semb",
        EmbeddingMatrix(unit_rows(rng, len(chunk_ids), args.dim), chunk_ids, "demo-audio"),
    )

    images, concepts = [], []
    for n in range(args.images):
        image_id = f"img{n:02d}"
        obj = OBJECTS[n % len(OBJECTS)]
        images.append({"image_id": image_id, "caption": f"a photo of a {obj}", "source_tag": "demo"})
        for extractor in ("vlm-a", "vlm-b"):
            for j in range(2):
                concepts.append(
                    {
                        "concept_id": f"{image_id}:{extractor}:{j}",
                        "image_id": image_id,
                        "object": obj,
                        "description": f"sound of a {obj} variant {j}",
                        "extractor": extractor,
                    }
                )
    (root / "images.jsonl").write_text(
        "\n".join(json.dumps(r) for r in images) + "\n", encoding="utf-8"
    )
    (root / "concepts.jsonl").write_text(
        "\n".join(json.dumps(r) for r in concepts) + "\n", encoding="utf-8"
    )
    write_embeddings(
        root / "text.semb",
        EmbeddingMatrix(
            unit_rows(rng, len(concepts), args.dim),
            [c["concept_id"] for c in concepts],
            "demo-text",
        ),
    )

    (root / "sonify.toml").write_text(
        "\n".join(
            [
                f"seed = {args.seed}",
                "top_k = 5",
                'tie_policy = "inclusive"',
                "max_sources = 3",
                "workers = 1",
                "",
                "[gain]",
                "center = -23.0",
                "half_width = 1.0",
                "",
                "[paths]",
                'pool_dir = "pool"',
                'audio_embeddings = "audio.semb"',
                'text_embeddings = "text.semb"',
                'concepts = "concepts.jsonl"',
                'images = "images.jsonl"',
                'output_dir = "out"',
            ]
        )
        + "\n",
        encoding="utf-8",
    )
    print(f"demo dataset ready: sonify run --config {root / 'sonify.toml'}")


if __name__ == "__main__":
    main()
