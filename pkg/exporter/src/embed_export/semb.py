"""Standalone writer for the pipeline's SEMB embedding format.

Layout (little-endian): magic "SEMB" | version u32 = 1 | N u64 | D u32 |
flags u32 (bit0 = rows L2-normalized) | encoder tag (u16 length + UTF-8) |
N ids (u16 length + UTF-8 each) | N*D float32 payload, row-major.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"SEMB"
VERSION = 1


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for u16 prefix: {len(raw)} bytes")
    return struct.pack("<H", len(raw)) + raw


def write_semb(
    path: str | Path,
    data: np.ndarray,
    ids: list[str],
    encoder_tag: str,
    normalized: bool = False,
) -> None:
    """Serialize embeddings atomically (temp file + rename)."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 2 or data.shape[0] != len(ids):
        raise ValueError("data must be (N, D) with one id per row")
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<Q", data.shape[0]),
        struct.pack("<I", data.shape[1]),
        struct.pack("<I", 1 if normalized else 0),
        _pack_str(encoder_tag),
    ]
    parts.extend(_pack_str(rid) for rid in ids)
    parts.append(data.tobytes())

    path = Path(path)
    fd, temp_name = tempfile.mkstemp(dir=path.parent, suffix=".semb.tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(b"".join(parts))
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
