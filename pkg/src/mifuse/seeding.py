"""Deterministic derivation of per-stage random seeds from one master seed."""

import hashlib


def derive_seed(master: int, *parts) -> int:
    """Derive a child seed from a master seed and a stage path.

    Uses SHA-256 so the mapping is stable across processes and platforms,
    unlike Python's builtin ``hash``.
    """
    key = "/".join([str(int(master))] + [str(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    # 32-bit range: accepted by both numpy generators and scikit-learn.
    return int.from_bytes(digest[:4], "little")
