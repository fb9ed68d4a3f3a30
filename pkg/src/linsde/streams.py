"""Reproducible random streams.

Every stream is a Philox (counter-based) generator keyed by a
``SeedSequence`` built from the master seed and a tuple of integer tags,
so the stream for a given (seed, tag) never depends on how many other
streams were drawn or on the worker that draws it.

Replications are simulated in fixed blocks of :data:`BLOCK_SIZE`; block
``b`` of purpose ``p`` uses ``stream(seed, p, b)``.  Replication ``i``
is row ``i % BLOCK_SIZE`` of block ``i // BLOCK_SIZE``, and blocks are
always generated at full size, so a replication's randomness is a
function of (seed, purpose, i) alone.
"""
from __future__ import annotations

import numpy as np

BLOCK_SIZE = 4096

# purpose tags
SIM = 0
ORDER_A = 1
ORDER_B = 2
STATIONARY = 3
GOU = 4
RENEWAL = 5


def stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, tags)])))


def blocks(reps: int) -> list[tuple[int, int]]:
    """(block index, rows used) for ``reps`` replications."""
    out = []
    b = 0
    left = reps
    while left > 0:
        n = min(BLOCK_SIZE, left)
        out.append((b, n))
        left -= n
        b += 1
    return out
