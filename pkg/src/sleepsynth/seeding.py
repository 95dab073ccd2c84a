"""Stable seed derivation.

Every random stream in the pipeline is derived from a base seed plus a
label path, via SHA-256 of the canonical string form. This is stable
across processes and platforms (unlike Python's salted hash()), so
partial re-runs of an experiment grid agree with full runs.
"""

from __future__ import annotations

import hashlib


def stable_seed(*parts) -> int:
    """Derive a 63-bit seed from a sequence of hashable-as-text parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF
