"""Deterministic, platform-stable randomness derivation.

Python's built-in ``hash`` is salted per process, so every derived stream
here goes through blake2b instead.  Deriving independent streams from
(seed, label, index...) keys is what makes sampling independent of
scheduling and of streaming vs. batch processing.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_digest(*parts: object) -> int:
    """64-bit digest of the parts, identical across runs and platforms."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def derived_rng(*parts: object) -> np.random.Generator:
    """A numpy Generator seeded from a stable digest of the parts."""
    return np.random.default_rng(stable_digest(*parts))


def uniform01(*parts: object) -> float:
    """A deterministic uniform draw in [0, 1) keyed by the parts."""
    return stable_digest(*parts) / 2.0**64
