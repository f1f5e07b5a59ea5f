"""Seed derivation and canonical serialization helpers."""

from __future__ import annotations

import hashlib
import json


def derive_seed(master: int, *labels) -> int:
    """Stable 63-bit seed from a master seed and a label path.

    Stage seeds are hashes of (master, labels...), so adding stages never
    reshuffles the randomness of existing ones.
    """
    text = str(int(master)) + "/" + "/".join(str(x) for x in labels)
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def canonical_json(obj) -> str:
    """Deterministic JSON used for config hashing and report files."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()
