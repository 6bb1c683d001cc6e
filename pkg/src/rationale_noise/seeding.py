"""Order-independent seed derivation.

Every random stream in the package is keyed by ``mix(base_seed, *keys)`` so a
result depends only on *which* cell or document it belongs to, never on the
order in which cells are scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix(seed: int, *keys: int) -> int:
    """Fold integer keys into a 64-bit seed with the splitmix64 finalizer."""
    h = _splitmix64(seed & MASK64)
    for k in keys:
        h = _splitmix64(h ^ (k & MASK64))
    return h


def text_key(s: str) -> int:
    """Stable 64-bit key for a string (unlike ``hash``, not salted per process)."""
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")


def generator(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``mix(seed, *keys)``.

    Normal variates come from numpy's ziggurat transform of that stream; they
    are reproducible for a given numpy release, not across implementations.
    """
    return np.random.Generator(np.random.Philox(key=mix(seed, *keys)))
