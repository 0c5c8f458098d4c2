"""Single-root seed derivation: every stage hashes its name into the seed."""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed"]


def derive_seed(base: int, stage: str) -> int:
    """Deterministic per-stage seed from the run seed and a stage name."""
    digest = hashlib.sha256(f"{base}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")
