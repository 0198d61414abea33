"""Audio domain types and the decode / downmix / resample / chunk operations."""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, gcd
from pathlib import Path

import numpy as np
from scipy.signal import firwin, upfirdn

from . import wavio
from .errors import AudioFormatError

#: Kaiser-windowed sinc kernel: 32 zero crossings each side of center
#: (64 taps per output sample) and beta for ~100 dB stopband attenuation.
KERNEL_HALF_WIDTH = 32
KERNEL_KAISER_BETA = 10.06


@dataclass(frozen=True)
class AudioClip:
    """A decoded recording: (num_samples, num_channels) float32 in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    source_id: str

    def __post_init__(self) -> None:
        if self.samples.ndim != 2:
            raise AudioFormatError("clip samples must have shape (num_samples, channels)")
        if self.sample_rate <= 0:
            raise AudioFormatError("sample_rate must be positive")
        if self.samples.shape[1] < 1:
            raise AudioFormatError("clip must have at least one channel")

    @property
    def channels(self) -> int:
        return self.samples.shape[1]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass(frozen=True)
class AudioChunk:
    """A fixed-length mono segment of a standardized clip.

    The last `pad_samples` entries are trailing zeros appended to reach the
    fixed chunk length; a chunk is never pure padding.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str
    chunk_index: int
    pad_samples: int = 0

    def __post_init__(self) -> None:
        if self.samples.ndim != 1:
            raise AudioFormatError("chunk samples must be 1-D mono")
        if self.sample_rate <= 0:
            raise AudioFormatError("sample_rate must be positive")
        if self.chunk_index < 0:
            raise AudioFormatError("chunk_index must be >= 0")
        if not 0 <= self.pad_samples < len(self.samples):
            raise AudioFormatError(
                f"pad_samples must be in [0, {len(self.samples)}), got {self.pad_samples}"
            )
        if self.pad_samples and np.any(self.samples[-self.pad_samples :] != 0.0):
            raise AudioFormatError("pad region must be exactly zero")

    @property
    def chunk_id(self) -> str:
        return f"{self.source_id}_{self.chunk_index:04d}"


def decode_audio(path: str | Path, source_id: str | None = None) -> AudioClip:
    """Decode a WAV file into a clip at its native rate and channel count."""
    path = Path(path)
    samples, rate = wavio.read_wav(path)
    return AudioClip(
        samples=samples,
        sample_rate=rate,
        source_id=source_id if source_id is not None else path.stem,
    )


def downmix_to_mono(clip: AudioClip) -> AudioClip:
    """Average all channels into one; mono input is returned unchanged."""
    if clip.channels == 1:
        return clip
    mono = clip.samples.mean(axis=1, dtype=np.float64).astype(np.float32)
    return AudioClip(mono[:, None], clip.sample_rate, clip.source_id)


def _require_mono(clip: AudioClip, op: str) -> np.ndarray:
    if clip.channels != 1:
        raise AudioFormatError(f"{op} requires a mono clip, got {clip.channels} channels")
    return clip.samples[:, 0]


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited polyphase resampling to target_rate.

    Output length is round(n * target_rate / input_rate) (half-up). The
    anti-alias filter is a windowed sinc with the module-level kernel
    parameters; a clip already at target_rate is returned bit-identical.
    """
    if target_rate <= 0:
        raise AudioFormatError("target_rate must be positive")
    x = _require_mono(clip, "resample")
    if clip.sample_rate == target_rate:
        return clip

    g = gcd(clip.sample_rate, target_rate)
    up, down = target_rate // g, clip.sample_rate // g
    n_out = (2 * len(x) * up + down) // (2 * down)
    if n_out == 0:
        raise AudioFormatError("clip too short to resample to target_rate")

    y = _polyphase(x.astype(np.float64), up, down, n_out)
    return AudioClip(y.astype(np.float32)[:, None], target_rate, clip.source_id)


def _polyphase(x: np.ndarray, up: int, down: int, n_out: int) -> np.ndarray:
    # Filter runs at rate fs*up; cutoff sits at the lower of the two Nyquists.
    max_rate = max(up, down)
    half_len = KERNEL_HALF_WIDTH * max_rate
    kernel = firwin(
        2 * half_len + 1, 1.0 / max_rate, window=("kaiser", KERNEL_KAISER_BETA)
    )
    kernel *= up
    # Zero-prefix so the group delay is a whole number of output samples.
    lead = (-half_len) % down
    padded = np.concatenate([np.zeros(lead), kernel])
    skip = (half_len + lead) // down
    y = upfirdn(padded, x, up, down)[skip : skip + n_out]
    if len(y) < n_out:
        y = np.concatenate([y, np.zeros(n_out - len(y))])
    return y


def chunk(clip: AudioClip, chunk_seconds: float) -> list[AudioChunk]:
    """Split a mono clip into fixed-length segments, zero-padding the last.

    Produces ceil(n / chunk_len) chunks; only the final one may be padded,
    and a clip shorter than one chunk yields a single padded chunk.
    """
    if chunk_seconds <= 0:
        raise AudioFormatError("chunk_seconds must be positive")
    x = _require_mono(clip, "chunk")
    if len(x) == 0:
        raise AudioFormatError("cannot chunk an empty clip")
    chunk_len = round(chunk_seconds * clip.sample_rate)
    if chunk_len <= 0:
        raise AudioFormatError("chunk length is zero at this sample rate")

    n_chunks = ceil(len(x) / chunk_len)
    chunks = []
    for index in range(n_chunks):
        segment = x[index * chunk_len : (index + 1) * chunk_len]
        pad = chunk_len - len(segment)
        if pad:
            segment = np.concatenate([segment, np.zeros(pad, dtype=np.float32)])
        chunks.append(
            AudioChunk(
                samples=segment.copy() if not pad else segment,
                sample_rate=clip.sample_rate,
                source_id=clip.source_id,
                chunk_index=index,
                pad_samples=pad,
            )
        )
    return chunks
