"""Seeded random-stream construction.

All randomness in an experiment flows from three named integer seeds
(fixed-pattern, temporal, environment). Streams are derived from a seed
plus an integer path, so independent quantities never share a generator
and parallel trials cannot collide.

Fixed-pattern substrate draws use Philox, a counter-based generator, so
each keyed quantity is reproduced independently of evaluation order.
High-volume sequential draws (per-step membrane noise) use SFC64, which
generates normals roughly twice as fast.
"""

from __future__ import annotations

import numpy as np


def keyed_stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based (Philox) generator for the given (seed, path) key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=path)))


def fast_stream(seed: int, *path: int) -> np.random.Generator:
    """SFC64 generator for high-volume sequential draws under (seed, path)."""
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed, spawn_key=path)))


def derive_seed(seed: int, *path: int) -> int:
    """Deterministically derive a fresh 32-bit seed from (seed, path)."""
    return int(np.random.SeedSequence(seed, spawn_key=path).generate_state(1, np.uint32)[0])
