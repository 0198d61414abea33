"""Embedding matrix storage ("SEMB" binary format) and the cosine kernel.

File layout, all integers little-endian:

    magic "SEMB" | version u32 = 1 | N u64 | D u32 | flags u32 (bit0 =
    rows are L2-normalized) | encoder_tag (u16 length + UTF-8) |
    N ids (u16 length + UTF-8 each) | N*D float32 payload, row-major.

Rows are normalized once at load so cosine similarity reduces to a dot
product; queries are normalized per call.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmbeddingFormatError

MAGIC = b"SEMB"
VERSION = 1
FLAG_NORMALIZED = 1 << 0

#: Above this width, dot products accumulate block sums in float64.
_ACCUM_BLOCK = 1024


@dataclass
class EmbeddingMatrix:
    """N x D float32 embeddings with a string ID per row."""

    data: np.ndarray
    ids: list[str]
    encoder_tag: str = ""
    normalized: bool = False
    _index: dict[str, int] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise EmbeddingFormatError("embedding matrix must be 2-D with N, D >= 1")
        if len(self.ids) != self.data.shape[0]:
            raise EmbeddingFormatError(
                f"{len(self.ids)} ids for {self.data.shape[0]} rows"
            )
        if not np.isfinite(self.data).all():
            raise EmbeddingFormatError("non-finite embedding values")
        if len(set(self.ids)) != len(self.ids):
            dupe = _first_duplicate(self.ids)
            raise EmbeddingFormatError(f"duplicate ID: {dupe!r}")
        if self.normalized:
            norms = np.linalg.norm(self.data, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-4):
                raise EmbeddingFormatError("normalized flag set but rows are not unit norm")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def index_of(self, row_id: str) -> int:
        if self._index is None:
            self._index = {rid: n for n, rid in enumerate(self.ids)}
        try:
            return self._index[row_id]
        except KeyError:
            raise EmbeddingFormatError(f"unknown ID: {row_id!r}") from None

    def row(self, row_id: str) -> np.ndarray:
        return self.data[self.index_of(row_id)]

    def l2_normalized(self) -> "EmbeddingMatrix":
        """Copy with unit-norm rows; zero-norm rows are rejected."""
        if self.normalized:
            return self
        norms = np.linalg.norm(self.data.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            raise EmbeddingFormatError("cannot normalize zero-norm row")
        data = (self.data / norms[:, None]).astype(np.float32)
        return EmbeddingMatrix(data, list(self.ids), self.encoder_tag, normalized=True)


@dataclass(frozen=True)
class ScoreVector:
    """Similarity of one query against every pool row, in pool order."""

    scores: np.ndarray
    query_id: str

    def __post_init__(self) -> None:
        if self.scores.ndim != 1:
            raise EmbeddingFormatError("scores must be 1-D")
        if not np.isfinite(self.scores).all():
            raise EmbeddingFormatError("non-finite similarity scores")


def _first_duplicate(ids: list[str]) -> str:
    seen: set[str] = set()
    for rid in ids:
        if rid in seen:
            return rid
        seen.add(rid)
    return ""


def write_embeddings(path: str | Path, matrix: EmbeddingMatrix) -> None:
    """Serialize a matrix in the SEMB format."""
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<Q", matrix.rows),
        struct.pack("<I", matrix.dim),
        struct.pack("<I", FLAG_NORMALIZED if matrix.normalized else 0),
        _pack_str(matrix.encoder_tag),
    ]
    parts.extend(_pack_str(rid) for rid in matrix.ids)
    parts.append(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise EmbeddingFormatError(f"string too long for u16 prefix: {len(raw)} bytes")
    return struct.pack("<H", len(raw)) + raw


def load_embeddings(path: str | Path, normalize: bool = True) -> EmbeddingMatrix:
    """Read and validate a SEMB file.

    By default rows are L2-normalized on load (flag set accordingly); pass
    normalize=False to keep raw values, e.g. for feature statistics.
    """
    blob = Path(path).read_bytes()
    view = memoryview(blob)
    if len(blob) < 24 or view[:4] != MAGIC:
        raise EmbeddingFormatError(f"bad magic in {path}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise EmbeddingFormatError(f"unsupported version {version} in {path}")
    (rows,) = struct.unpack_from("<Q", blob, 8)
    (dim,) = struct.unpack_from("<I", blob, 16)
    (flags,) = struct.unpack_from("<I", blob, 20)

    offset = 24
    encoder_tag, offset = _unpack_str(blob, offset, path)
    ids = []
    for _ in range(rows):
        rid, offset = _unpack_str(blob, offset, path)
        ids.append(rid)

    expected = rows * dim * 4
    payload = blob[offset:]
    if len(payload) != expected:
        raise EmbeddingFormatError(
            f"payload size mismatch in {path}: expected {expected} bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dim)
    matrix = EmbeddingMatrix(
        data.copy(), ids, encoder_tag, normalized=bool(flags & FLAG_NORMALIZED)
    )
    return matrix.l2_normalized() if normalize else matrix


def _unpack_str(blob: bytes, offset: int, path: str | Path) -> tuple[str, int]:
    if offset + 2 > len(blob):
        raise EmbeddingFormatError(f"truncated header in {path}")
    (length,) = struct.unpack_from("<H", blob, offset)
    offset += 2
    if offset + length > len(blob):
        raise EmbeddingFormatError(f"truncated header in {path}")
    try:
        text = blob[offset : offset + length].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EmbeddingFormatError(f"invalid UTF-8 in {path}: {exc}") from exc
    return text, offset + length


def _normalize_query(query: np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != dim:
        raise EmbeddingFormatError(f"query dim {q.shape[0]} != pool dim {dim}")
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise EmbeddingFormatError("zero query vector")
    return (q / norm).astype(np.float32)


def _pool_dot(data: np.ndarray, q: np.ndarray) -> np.ndarray:
    if data.shape[1] <= _ACCUM_BLOCK:
        return data @ q
    acc = np.zeros(data.shape[0], dtype=np.float64)
    for start in range(0, data.shape[1], _ACCUM_BLOCK):
        stop = start + _ACCUM_BLOCK
        acc += data[:, start:stop] @ q[start:stop]
    return acc.astype(np.float32)


def cosine_sim(
    query: np.ndarray, pool: EmbeddingMatrix, query_id: str = ""
) -> ScoreVector:
    """Cosine similarity of one query vector against every pool row."""
    if not pool.normalized:
        pool = pool.l2_normalized()
    q = _normalize_query(query, pool.dim)
    scores = np.clip(_pool_dot(pool.data, q), -1.0, 1.0)
    return ScoreVector(scores=scores, query_id=query_id)


def batch_cosine_sim(queries: np.ndarray, pool: EmbeddingMatrix) -> np.ndarray:
    """Cosine similarity for a (B, D) query block; returns (B, N) scores.

    One matrix-matrix product reads the pool once for the whole block, which
    is where batched throughput comes from.
    """
    if not pool.normalized:
        pool = pool.l2_normalized()
    qs = np.asarray(queries, dtype=np.float64)
    if qs.ndim != 2 or qs.shape[1] != pool.dim:
        raise EmbeddingFormatError("queries must have shape (B, pool dim)")
    norms = np.linalg.norm(qs, axis=1)
    if np.any(norms == 0.0):
        raise EmbeddingFormatError("zero query vector")
    qs = (qs / norms[:, None]).astype(np.float32)
    return np.clip(qs @ pool.data.T, -1.0, 1.0)
