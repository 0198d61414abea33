"""Reader for the pipeline's canonical chunk format: mono float32 WAV."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class WavError(Exception):
    pass


def read_float32_mono(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode a mono IEEE-float32 WAV chunk; returns (samples, rate)."""
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise WavError(f"{path}: not a RIFF/WAVE stream")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise WavError(f"{path}: missing fmt or data chunk")
    tag, channels, rate, _, _, bits = fmt
    if tag != 3 or bits != 32 or channels != 1:
        raise WavError(
            f"{path}: expected mono float32 (canonical chunk format), "
            f"got tag={tag} bits={bits} channels={channels}"
        )
    return np.frombuffer(data, dtype="<f4").copy(), rate
