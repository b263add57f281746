"""Counter-based random streams.

Every random draw in a sweep comes from a generator keyed by
``(master_seed, *path)``, so results do not depend on scheduling, worker
count, or which other grid points are present.
"""

import hashlib
import struct

import numpy as np


def value_key(value):
    """Stable 63-bit integer key for a float grid value."""
    digest = hashlib.sha256(struct.pack("<d", float(value))).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def seed_sequence(seed, *path):
    if seed is None or int(seed) < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path))


def stream(seed, *path):
    """Independent ``numpy.random.Generator`` for the given key path."""
    return np.random.default_rng(seed_sequence(seed, *path))


def child_seed(seed, *path):
    """Derive a plain integer seed (for APIs that take one) from a key path."""
    return int(seed_sequence(seed, *path).generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> 1)
