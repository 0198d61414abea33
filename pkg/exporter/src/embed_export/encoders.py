"""Encoder registry and the built-in deterministic reference encoders.

The reference encoders are real feature extractors (spectral band energies
for audio, hashed character n-grams for text) with a fixed random projection
seeded from the model tag, so exports are bit-reproducible anywhere without
downloading checkpoints. Heavyweight pretrained encoders can be registered
under new tags; asking for an unregistered tag is a model load failure.
"""

from __future__ import annotations

import hashlib
import zlib
from functools import lru_cache
from typing import Callable

import numpy as np

EMBEDDING_DIM = 512


class EncoderError(Exception):
    pass


AudioEncoder = Callable[[np.ndarray, int], np.ndarray]
TextEncoder = Callable[[str], np.ndarray]


def _tag_rng(tag: str, purpose: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{purpose}|{tag}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


@lru_cache(maxsize=8)
def _projection(tag: str, in_dim: int, out_dim: int) -> np.ndarray:
    rng = _tag_rng(tag, f"projection-{in_dim}x{out_dim}")
    return (rng.standard_normal((in_dim, out_dim)) / np.sqrt(in_dim)).astype(np.float32)


def _band_edges(n_bands: int, rate: int, n_fft: int) -> np.ndarray:
    freqs = np.geomspace(50.0, rate / 2.0, n_bands + 2)
    return np.clip((freqs / (rate / 2.0) * (n_fft // 2)).astype(int), 0, n_fft // 2)


def spectral_audio_encoder(tag: str = "spectral-v1") -> AudioEncoder:
    """Log band-energy features (mean + std over frames), tag-seeded projection."""
    n_fft, hop, n_bands = 1024, 512, 48

    def encode(samples: np.ndarray, rate: int) -> np.ndarray:
        x = np.asarray(samples, dtype=np.float64)
        if x.ndim != 1 or len(x) < n_fft:
            raise EncoderError(f"audio too short to encode: {len(x)} samples")
        if not np.any(x):
            raise EncoderError("silent chunk carries no spectral features")
        window = np.hanning(n_fft)
        n_frames = (len(x) - n_fft) // hop + 1
        edges = _band_edges(n_bands, rate, n_fft)
        bands = np.empty((n_frames, n_bands))
        for f in range(n_frames):
            spectrum = np.abs(np.fft.rfft(x[f * hop : f * hop + n_fft] * window))
            for b in range(n_bands):
                lo, hi = edges[b], max(edges[b + 2], edges[b] + 1)
                bands[f, b] = np.mean(spectrum[lo:hi] ** 2)
        features = np.concatenate(
            [np.log1p(bands).mean(axis=0), np.log1p(bands).std(axis=0)]
        )
        projected = features @ _projection(tag, len(features), EMBEDDING_DIM)
        return projected.astype(np.float32)

    return encode


def charngram_text_encoder(tag: str = "charngram-v1") -> TextEncoder:
    """Hashed character trigram counts, L2-scaled, tag-seeded projection."""
    buckets = 4096

    def encode(text: str) -> np.ndarray:
        body = f" {text.casefold().strip()} "
        if len(body) < 3:
            raise EncoderError("empty text cannot be encoded")
        counts = np.zeros(buckets, dtype=np.float64)
        for i in range(len(body) - 2):
            counts[zlib.crc32(body[i : i + 3].encode("utf-8")) % buckets] += 1.0
        counts /= np.linalg.norm(counts)
        projected = counts @ _projection(tag, buckets, EMBEDDING_DIM)
        return projected.astype(np.float32)

    return encode


AUDIO_MODELS: dict[str, Callable[[], AudioEncoder]] = {
    "spectral-v1": lambda: spectral_audio_encoder("spectral-v1"),
}
TEXT_MODELS: dict[str, Callable[[], TextEncoder]] = {
    "charngram-v1": lambda: charngram_text_encoder("charngram-v1"),
}


def available_models(mode: str) -> list[str]:
    return sorted(AUDIO_MODELS if mode == "audio" else TEXT_MODELS)


def get_encoder(mode: str, tag: str):
    registry = AUDIO_MODELS if mode == "audio" else TEXT_MODELS
    try:
        factory = registry[tag]
    except KeyError:
        raise EncoderError(
            f"model load failure: unknown {mode} model tag {tag!r} "
            f"(available: {', '.join(available_models(mode))})"
        ) from None
    return factory()
