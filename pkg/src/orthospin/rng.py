"""Seeded random streams.

Every stream is a Philox-4x64 counter-based generator keyed by a
``SeedSequence`` built from the user seed and a tuple of integer/str tags,
so that per-sample streams are independent of worker count and call order.
"""

import hashlib

import numpy as np

RNG_ID = "numpy-philox4x64-10"


def _tag(key):
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "little")
    return int(key)


def generator(seed, *keys):
    """Return a Generator for ``(seed, *keys)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *keys):
    """Derive a 64-bit integer seed for a sub-task."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
