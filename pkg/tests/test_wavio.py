import struct

import numpy as np
import pytest

from sonify import wavio
from sonify.errors import AudioDecodeError


def test_float32_round_trip(tmp_path):
    samples = np.linspace(-1, 1, 1000, dtype=np.float32)
    path = tmp_path / "f32.wav"
    wavio.write_wav(path, samples, 16000)
    decoded, rate = wavio.read_wav(path)
    assert rate == 16000
    assert decoded.shape == (1000, 1)
    np.testing.assert_array_equal(decoded[:, 0], samples)


def test_pcm16_round_trip_stereo(tmp_path):
    rng = np.random.default_rng(0)
    samples = rng.uniform(-0.9, 0.9, (500, 2)).astype(np.float32)
    path = tmp_path / "pcm16.wav"
    wavio.write_wav(path, samples, 44100, fmt="pcm16")
    decoded, rate = wavio.read_wav(path)
    assert rate == 44100
    assert decoded.shape == (500, 2)
    np.testing.assert_allclose(decoded, samples, atol=1.0 / 32767)


def _raw_wav(fmt_tag: int, channels: int, rate: int, bits: int, payload: bytes,
             extensible_guid: bytes | None = None) -> bytes:
    if extensible_guid is not None:
        fmt_body = struct.pack(
            "<HHIIHH", 0xFFFE, channels, rate, rate * channels * bits // 8,
            channels * bits // 8, bits
        )
        fmt_body += struct.pack("<HH", 22, bits) + b"\x00\x00\x00\x00" + extensible_guid
    else:
        fmt_body = struct.pack(
            "<HHIIHH", fmt_tag, channels, rate, rate * channels * bits // 8,
            channels * bits // 8, bits
        )
    body = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    body += b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


def test_pcm24_decode(tmp_path):
    # full scale positive (0x7FFFFF) and negative (0x800000) plus zero
    payload = b"\xff\xff\x7f" + b"\x00\x00\x80" + b"\x00\x00\x00"
    path = tmp_path / "pcm24.wav"
    path.write_bytes(_raw_wav(1, 1, 16000, 24, payload))
    decoded, _ = wavio.read_wav(path)
    np.testing.assert_allclose(
        decoded[:, 0], [8388607 / 8388608, -1.0, 0.0], atol=1e-7
    )


def test_extensible_float_decode(tmp_path):
    data = np.array([0.25, -0.5], dtype="<f4").tobytes()
    guid = struct.pack("<H", 3) + wavio._GUID_TAIL
    path = tmp_path / "ext.wav"
    path.write_bytes(_raw_wav(0xFFFE, 1, 16000, 32, data, extensible_guid=guid))
    decoded, _ = wavio.read_wav(path)
    np.testing.assert_allclose(decoded[:, 0], [0.25, -0.5])


def test_skips_unknown_chunks(tmp_path):
    # LIST chunk with odd size before data must be word-aligned past
    data = np.array([0.5], dtype="<f4").tobytes()
    wav = _raw_wav(3, 1, 16000, 32, data)
    extra = b"LIST" + struct.pack("<I", 3) + b"abc\x00"
    patched = wav[:12] + extra + wav[12:]
    path = tmp_path / "extra.wav"
    path.write_bytes(patched)
    decoded, _ = wavio.read_wav(path)
    assert decoded[0, 0] == pytest.approx(0.5)


def test_float_input_clipped_to_unit_range(tmp_path):
    data = np.array([1.75, -2.0], dtype="<f4").tobytes()
    path = tmp_path / "hot.wav"
    path.write_bytes(_raw_wav(3, 1, 16000, 32, data))
    decoded, _ = wavio.read_wav(path)
    np.testing.assert_array_equal(decoded[:, 0], [1.0, -1.0])


def test_missing_file_is_unreadable(tmp_path):
    with pytest.raises(AudioDecodeError, match="unreadable"):
        wavio.read_wav(tmp_path / "nope.wav")


def test_not_riff_is_unreadable(tmp_path):
    path = tmp_path / "junk.wav"
    path.write_bytes(b"this is not audio at all")
    with pytest.raises(AudioDecodeError, match="unreadable"):
        wavio.read_wav(path)


def test_empty_data_chunk_is_zero_length(tmp_path):
    path = tmp_path / "empty.wav"
    path.write_bytes(_raw_wav(1, 1, 16000, 16, b""))
    with pytest.raises(AudioDecodeError, match="zero-length stream"):
        wavio.read_wav(path)


def test_alaw_is_unsupported_codec(tmp_path):
    path = tmp_path / "alaw.wav"
    path.write_bytes(_raw_wav(6, 1, 8000, 8, b"\x00" * 8))
    with pytest.raises(AudioDecodeError, match="unsupported codec"):
        wavio.read_wav(path)


def test_write_is_deterministic(tmp_path):
    samples = np.linspace(-0.5, 0.5, 333, dtype=np.float32)
    a, b = tmp_path / "a.wav", tmp_path / "b.wav"
    wavio.write_wav(a, samples, 16000)
    wavio.write_wav(b, samples, 16000)
    assert a.read_bytes() == b.read_bytes()
