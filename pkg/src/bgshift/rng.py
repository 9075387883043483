"""Seed splitting.

Every random stream is keyed from one 64-bit run seed combined with a hash of
stream labels (image id, stage name, ...), so results do not depend on the
order or concurrency in which images are processed.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def stable_hash64(*keys) -> int:
    h = hashlib.sha256("\x1f".join(str(k) for k in keys).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def derive_seed(seed: int, *keys) -> int:
    return (int(seed) & MASK64) ^ stable_hash64(*keys)


def stream(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
