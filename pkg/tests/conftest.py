import json

import numpy as np
import pytest

from sonify import wavio
from sonify.audio import AudioChunk
from sonify.embeddings import EmbeddingMatrix, write_embeddings


def tone(freq: float, seconds: float, rate: int = 16000, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(round(seconds * rate)) / rate
    return (amplitude * np.sin(2 * np.pi * freq * t)).astype(np.float32)


def make_chunk(
    samples: np.ndarray,
    rate: int = 16000,
    source_id: str = "test",
    chunk_index: int = 0,
    pad_samples: int = 0,
) -> AudioChunk:
    return AudioChunk(
        samples=np.asarray(samples, dtype=np.float32),
        sample_rate=rate,
        source_id=source_id,
        chunk_index=chunk_index,
        pad_samples=pad_samples,
    )


@pytest.fixture
def tone_chunk() -> AudioChunk:
    return make_chunk(tone(997.0, 5.0))


def unit_rows(n: int, d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((n, d))
    return (rows / np.linalg.norm(rows, axis=1, keepdims=True)).astype(np.float32)


@pytest.fixture(scope="session")
def pipeline_fixture(tmp_path_factory) -> dict:
    """A miniature end-to-end dataset: 10 images over a 50-chunk pool.

    Ten 25-second source recordings standardize into 5 chunks each. Audio
    and text embeddings are synthetic unit vectors; every image carries two
    concepts from each of two extractors.
    """
    from sonify.pool import StandardizeConfig, standardize_pool

    root = tmp_path_factory.mktemp("pipeline")
    raw_dir = root / "raw"
    pool_dir = root / "pool"
    raw_dir.mkdir()

    rng = np.random.default_rng(1234)
    rates = [16000, 16000, 22050, 44100, 16000, 48000, 16000, 32000, 16000, 8000]
    for n in range(10):
        rate = rates[n]
        t = np.arange(round(25.0 * rate)) / rate
        freq = 150.0 + 85.0 * n
        wave = 0.4 * np.sin(2 * np.pi * freq * t)
        wave += 0.08 * rng.standard_normal(len(t))
        wavio.write_wav(raw_dir / f"src{n:02d}.wav", np.clip(wave, -1, 1).astype(np.float32), rate)
    result = standardize_pool(raw_dir, pool_dir, StandardizeConfig())
    assert len(result.records) == 50 and not result.skipped

    chunk_ids = [r.chunk_id for r in result.records]
    dim = 32
    audio_semb = root / "audio.semb"
    write_embeddings(
        audio_semb,
        EmbeddingMatrix(unit_rows(50, dim, seed=7), chunk_ids, encoder_tag="synthetic-audio"),
    )

    images = []
    concepts = []
    objects = ["dog", "river", "train", "wind", "crowd", "bird", "rain", "fire", "bell", "engine"]
    for n in range(10):
        image_id = f"img{n:02d}"
        images.append(
            {"image_id": image_id, "caption": f"a photo of a {objects[n]} outdoors", "source_tag": "fixture"}
        )
        for extractor in ("vlm-a", "vlm-b"):
            for j in range(2):
                concepts.append(
                    {
                        "concept_id": f"{image_id}:{extractor}:{j}",
                        "image_id": image_id,
                        "object": objects[n],
                        "description": f"sound of a {objects[n]} variant {j}",
                        "extractor": extractor,
                    }
                )
    images_path = root / "images.jsonl"
    concepts_path = root / "concepts.jsonl"
    images_path.write_text("\n".join(json.dumps(r) for r in images) + "\n", encoding="utf-8")
    concepts_path.write_text("\n".join(json.dumps(r) for r in concepts) + "\n", encoding="utf-8")

    text_semb = root / "text.semb"
    concept_ids = [c["concept_id"] for c in concepts]
    write_embeddings(
        text_semb,
        EmbeddingMatrix(unit_rows(len(concept_ids), dim, seed=11), concept_ids, encoder_tag="synthetic-text"),
    )

    config_path = root / "sonify.toml"
    config_path.write_text(
        "\n".join(
            [
                "seed = 7",
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
    return {
        "root": root,
        "raw_dir": raw_dir,
        "pool_dir": pool_dir,
        "audio_semb": audio_semb,
        "text_semb": text_semb,
        "images": images_path,
        "concepts": concepts_path,
        "config": config_path,
        "chunk_ids": chunk_ids,
    }
