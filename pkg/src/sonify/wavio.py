"""Minimal RIFF/WAVE codec for the formats the pipeline pins down.

Reads PCM 8/16/24/32-bit integer and IEEE 32/64-bit float WAV files
(including WAVE_FORMAT_EXTENSIBLE wrappers) and writes the canonical chunk
format: mono 32-bit float. The stdlib ``wave`` module rejects float WAVs,
hence this module.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import AudioDecodeError

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# First two bytes of the 16-byte SubFormat GUID carry the real format tag.
_GUID_TAIL = bytes.fromhex("000000001000800000aa00389b71")


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode a WAV file.

    Returns (samples, sample_rate) where samples has shape
    (num_frames, num_channels), dtype float32, values in [-1, 1].
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise AudioDecodeError(f"unreadable file: {path}: {exc}") from exc
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise AudioDecodeError(f"unreadable file: {path}: not a RIFF/WAVE stream")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt(body, path)
        elif chunk_id == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise AudioDecodeError(f"unreadable file: {path}: missing fmt chunk")
    if data is None or len(data) == 0:
        raise AudioDecodeError(f"zero-length stream: {path}")

    tag, channels, rate, bits = fmt
    frame_size = channels * (bits // 8)
    usable = len(data) - len(data) % frame_size
    if usable == 0:
        raise AudioDecodeError(f"zero-length stream: {path}")
    samples = _decode_payload(data[:usable], tag, bits, path)
    return samples.reshape(-1, channels), rate


def _parse_fmt(body: bytes, path: Path) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise AudioDecodeError(f"unreadable file: {path}: short fmt chunk")
    tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", body, 0)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise AudioDecodeError(f"unreadable file: {path}: short extensible fmt")
        guid = body[24:40]
        if guid[2:] != _GUID_TAIL:
            raise AudioDecodeError(f"unsupported codec in {path}: subformat {guid.hex()}")
        (tag,) = struct.unpack_from("<H", guid, 0)
    if tag not in (WAVE_FORMAT_PCM, WAVE_FORMAT_IEEE_FLOAT):
        raise AudioDecodeError(f"unsupported codec in {path}: format tag {tag}")
    if channels < 1 or rate <= 0:
        raise AudioDecodeError(f"unreadable file: {path}: bad fmt fields")
    return tag, channels, rate, bits


def _decode_payload(data: bytes, tag: int, bits: int, path: Path) -> np.ndarray:
    if tag == WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            out = np.frombuffer(data, dtype="<f4").astype(np.float32)
        elif bits == 64:
            out = np.frombuffer(data, dtype="<f8").astype(np.float32)
        else:
            raise AudioDecodeError(f"unsupported codec in {path}: {bits}-bit float")
        # float WAVs may exceed full scale; the clip contract is [-1, 1]
        return np.clip(out, -1.0, 1.0)
    if bits == 8:
        raw = np.frombuffer(data, dtype=np.uint8).astype(np.float32)
        return (raw - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(data, dtype="<i2").astype(np.float32) / 32768.0
    if bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3)
        padded = np.zeros((raw.shape[0], 4), dtype=np.uint8)
        padded[:, 1:] = raw  # sign-extend via shifted 32-bit view
        as_int = padded.view("<i4").ravel() >> 8
        return as_int.astype(np.float32) / 8388608.0
    if bits == 32:
        return np.frombuffer(data, dtype="<i4").astype(np.float32) / 2147483648.0
    raise AudioDecodeError(f"unsupported codec in {path}: {bits}-bit PCM")


def write_wav(
    path: str | Path,
    samples: np.ndarray,
    sample_rate: int,
    fmt: str = "float32",
) -> None:
    """Write samples (1-D mono or (frames, channels)) as a WAV file.

    fmt is "float32" (canonical chunk format) or "pcm16". Output bytes are a
    pure function of the inputs, so written files are hash-stable.
    """
    arr = np.asarray(samples)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("samples must be a non-empty 1-D or 2-D array")
    channels = arr.shape[1]

    if fmt == "float32":
        payload = arr.astype("<f4").tobytes()
        tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
    elif fmt == "pcm16":
        scaled = np.round(arr.astype(np.float64) * 32768.0)
        payload = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
        tag, bits = WAVE_FORMAT_PCM, 16
    else:
        raise ValueError(f"unsupported output format: {fmt}")

    block_align = channels * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH",
        16,
        tag,
        channels,
        sample_rate,
        sample_rate * block_align,
        block_align,
        bits,
    )
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)
