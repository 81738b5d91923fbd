"""Deterministic random-number plumbing.

All randomness in the toolkit flows through PCG64 generators seeded either
directly or through `derive_seed`, which hashes a master seed together with
a string label. Shuffles use numpy's Fisher-Yates permutation. Derived seeds
are recorded in run manifests so any stage can be replayed in isolation.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *labels: object) -> int:
    """Derive a child seed from a master seed and a label path.

    Uses SHA-256 over "master|label|label|..." and takes the first 8 bytes,
    so the mapping is stable across platforms and numpy versions.
    """
    key = "|".join([str(int(master))] + [str(part) for part in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int) -> np.random.Generator:
    """A PCG64 generator for the given 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed))


def derived_rng(master: int, *labels: object) -> np.random.Generator:
    """Generator seeded by `derive_seed(master, *labels)`."""
    return make_rng(derive_seed(master, *labels))
