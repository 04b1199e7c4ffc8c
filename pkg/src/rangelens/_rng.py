"""Seed derivation.

Every random quantity in the package is drawn from a Philox (counter-based)
bit generator keyed by a master seed plus a tuple of integer/string keys, so
a trial's stream depends only on *which* trial it is, never on the order in
which workers happen to run.  Normals come from numpy's ziggurat sampler on
top of that stream.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k)


def stream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed derived from ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))
