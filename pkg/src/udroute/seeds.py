"""Deterministic derivation of named random streams from one root seed."""

import hashlib


def derive_seed(root: int, label: str) -> int:
    """Map (root seed, stream label) to a stable 64-bit seed.

    Uses SHA-256 over the string "<root>:<label>" and keeps the first
    8 bytes, so every named stream is reproducible from the root seed
    alone and independent streams never collide by accident.
    """
    digest = hashlib.sha256(f"{root}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
