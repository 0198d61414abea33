"""Deterministic per-item RNG streams derived from a master seed.

Every random choice in the pipeline draws from a stream keyed by the master
seed plus a scope tuple (stage name, item id or ordinal). Streams are derived
through SHA-256, so results are independent of thread scheduling, platform,
and PYTHONHASHSEED.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_rng(master_seed: int, *scope: str | int) -> np.random.Generator:
    """Return a Generator for the stream identified by (master_seed, *scope)."""
    material = _SEP.join(
        str(part).encode("utf-8") for part in (master_seed, *scope)
    )
    digest = hashlib.sha256(material).digest()
    entropy = int.from_bytes(digest[:16], "little")
    return np.random.default_rng(np.random.SeedSequence(entropy))
