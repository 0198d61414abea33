"""Integrated loudness measurement (dB-LUFS) and gain normalization.

Implements the BS.1770-style integrated meter for mono signals: K-weighting
pre-filter (high-shelf + high-pass biquads), mean square over 400 ms blocks
with 75% overlap, absolute gate at -70 LKFS and relative gate 10 LU below
the first-pass gated mean. Normalization applies the derived gain G as a
plain linear scale 10^(G/20).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .audio import AudioChunk
from .errors import LoudnessError

BLOCK_SECONDS = 0.400
BLOCK_OVERLAP = 0.75
ABSOLUTE_GATE_LUFS = -70.0
RELATIVE_GATE_LU = 10.0
_OFFSET_DB = -0.691  # calibration so a 997 Hz sine reads its mean-square dB


@dataclass(frozen=True)
class LufsValue:
    """Integrated loudness; is_silence marks unmeasurable (fully gated) input."""

    value: float
    is_silence: bool = False

    def __post_init__(self) -> None:
        if self.is_silence and self.value != -math.inf:
            raise LoudnessError("silence sentinel must carry -inf")


@dataclass(frozen=True)
class GainResult:
    """Gain applied during normalization, in dB and as a linear factor."""

    gain_db: float
    linear_scale: float

    @classmethod
    def from_db(cls, gain_db: float) -> "GainResult":
        return cls(gain_db=gain_db, linear_scale=10.0 ** (gain_db / 20.0))


def _k_weighting_coefficients(rate: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Biquad (b, a) pairs for the K-weighting pre-filter at any sample rate.

    Uses the pre-warped analog prototype of the reference 48 kHz filters
    (shelf: f0=1681.97 Hz, +4 dB, Q=0.7072; high-pass: f0=38.14 Hz, Q=0.5003)
    so the magnitude response matches the standard at arbitrary rates.
    """
    # Stage 1: high-frequency shelf.
    f0, gain_db, q = 1681.9744509555319, 3.99984385397, 0.7071752369554193
    k = math.tan(math.pi * f0 / rate)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh**0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf_b = np.array(
        [(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0]
    )
    shelf_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])

    # Stage 2: high-pass.
    f0, q = 38.13547087613982, 0.5003270373253953
    k = math.tan(math.pi * f0 / rate)
    a0 = 1.0 + k / q + k * k
    hp_b = np.array([1.0, -2.0, 1.0])
    hp_a = np.array([1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0])

    return [(shelf_b, shelf_a), (hp_b, hp_a)]


def k_weight(samples: np.ndarray, rate: int) -> np.ndarray:
    """Apply the two K-weighting biquads to a mono signal."""
    out = np.asarray(samples, dtype=np.float64)
    for b, a in _k_weighting_coefficients(rate):
        out = lfilter(b, a, out)
    return out


def integrated_loudness(samples: np.ndarray, rate: int) -> LufsValue:
    """Gated integrated loudness of a mono signal (channel weight 1.0)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise LoudnessError("expected a mono 1-D signal")
    if rate <= 0:
        raise LoudnessError(f"wrong sample rate: {rate}")
    block = round(BLOCK_SECONDS * rate)
    hop = round(BLOCK_SECONDS * (1.0 - BLOCK_OVERLAP) * rate)
    if len(x) < block:
        raise LoudnessError(
            f"wrong length: need at least {block} samples ({BLOCK_SECONDS} s), got {len(x)}"
        )

    weighted = k_weight(x, rate)
    # Mean square per gating block via a cumulative sum of squares.
    csum = np.concatenate([[0.0], np.cumsum(weighted * weighted)])
    n_blocks = (len(x) - block) // hop + 1
    starts = np.arange(n_blocks) * hop
    powers = (csum[starts + block] - csum[starts]) / block

    with np.errstate(divide="ignore"):
        block_lufs = _OFFSET_DB + 10.0 * np.log10(powers)

    above_abs = block_lufs > ABSOLUTE_GATE_LUFS
    if not np.any(above_abs):
        return LufsValue(value=-math.inf, is_silence=True)

    relative_gate = (
        _OFFSET_DB + 10.0 * np.log10(powers[above_abs].mean()) - RELATIVE_GATE_LU
    )
    gated = above_abs & (block_lufs > relative_gate)
    if not np.any(gated):  # the loudest block always passes; defensive only
        return LufsValue(value=-math.inf, is_silence=True)
    return LufsValue(value=float(_OFFSET_DB + 10.0 * np.log10(powers[gated].mean())))


def measure_integrated_lufs(chunk: AudioChunk) -> LufsValue:
    """Integrated loudness of an audio chunk."""
    return integrated_loudness(chunk.samples, chunk.sample_rate)


def normalize_to_lufs(chunk: AudioChunk, target: float) -> tuple[AudioChunk, GainResult]:
    """Scale a chunk so its integrated loudness lands on target dB-LUFS.

    Gain is G = target - measured; every sample is multiplied by 10^(G/20),
    which keeps the pad region exactly zero. Silent input cannot be
    normalized (zero stays zero under any gain).
    """
    measured = measure_integrated_lufs(chunk)
    if measured.is_silence:
        raise LoudnessError("cannot normalize silence")
    gain = GainResult.from_db(target - measured.value)
    scaled = (chunk.samples * gain.linear_scale).astype(np.float32)
    return (
        AudioChunk(
            samples=scaled,
            sample_rate=chunk.sample_rate,
            source_id=chunk.source_id,
            chunk_index=chunk.chunk_index,
            pad_samples=chunk.pad_samples,
        ),
        gain,
    )
