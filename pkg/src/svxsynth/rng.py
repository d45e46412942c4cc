"""Deterministic child-stream derivation for parallel processing.

Every stochastic step in the pipeline draws from a Generator derived from
(global seed, image id, draw index). Child streams are independent of
worker scheduling, so processing images in parallel cannot change any
artifact. Python's builtin hash() is salted per process and must not be
used here; string parts are folded in through SHA-256 instead.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def stable_key(part: int | str) -> int:
    """Map a seed-path component to a stable 64-bit integer."""
    if isinstance(part, int):
        return part & _MASK64
    digest = hashlib.sha256(part.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def child_rng(seed: int, *path: int | str) -> np.random.Generator:
    """Generator for the stream identified by (seed, *path).

    The same (seed, path) always yields the same stream, regardless of
    how many other streams were derived before it.
    """
    entropy = [stable_key(seed)] + [stable_key(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def child_seed(seed: int, *path: int | str) -> int:
    """A plain integer seed derived from (seed, *path), for APIs that
    store a seed rather than a Generator."""
    entropy = [stable_key(seed)] + [stable_key(p) for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])
