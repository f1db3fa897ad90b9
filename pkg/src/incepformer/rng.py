"""Seed handling: every random stream is derived from one 64-bit seed."""

from __future__ import annotations

import zlib

import numpy as np


def _label_key(label) -> int:
    return zlib.crc32(str(label).encode("utf-8"))


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Return a generator for the sub-stream named by ``labels``.

    The same (seed, labels) always yields the same stream, independent of
    how many other streams were drawn before.
    """
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    key = tuple(_label_key(label) for label in labels)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
