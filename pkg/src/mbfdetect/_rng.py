"""Seeded random-number streams.

Every stochastic operation in the package takes an explicit 64-bit seed and
derives its generator here, so experiments replay bit-for-bit. Philox is
counter-based: independent streams can be spawned from (seed, *stream) tags
without coordination between workers.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def spawn_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a Generator for the stream identified by (seed, *stream)."""
    entropy = (int(seed) & _MASK64,) + tuple(int(s) & _MASK64 for s in stream)
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(entropy)))


def child_seed(seed: int, *stream: int) -> int:
    """A 63-bit integer seed hashed from (seed, *stream), for APIs taking ints."""
    entropy = (int(seed) & _MASK64,) + tuple(int(s) & _MASK64 for s in stream)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0] >> 1)
