"""Stable hashing used for doc ids and seeded per-document decisions.

All randomness in the pipeline derives from blake2b over
(seed, stage-label, doc_id); there is no global RNG state, so worker
parallelism cannot perturb results.
"""

from __future__ import annotations

import hashlib
import random


def stable_digest(*parts: str | bytes | int | float) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        if isinstance(part, (int, float)):
            part = repr(part)
        if isinstance(part, str):
            part = part.encode("utf-8")
        h.update(part)
        h.update(b"\x1f")
    return h.digest()


def stable_hex(*parts: str | bytes | int) -> str:
    return stable_digest(*parts).hex()


def derive_u64(seed: int, stage: str, key: str) -> int:
    """Deterministic 64-bit value for one (seed, stage, key) triple."""
    return int.from_bytes(stable_digest(seed, stage, key)[:8], "big")


def derive_unit(seed: int, stage: str, key: str) -> float:
    """Deterministic float in [0, 1) for seeded rate decisions."""
    return derive_u64(seed, stage, key) / 2**64


def derive_rng(seed: int, stage: str, key: str) -> random.Random:
    """Private RNG stream for one (seed, stage, key) triple."""
    return random.Random(derive_u64(seed, stage, key))
