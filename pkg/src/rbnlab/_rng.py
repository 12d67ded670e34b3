"""Seeded random streams.

Every Monte Carlo sample owns an independent stream derived from
``(seed, stream_id, sample_index)`` through :class:`numpy.random.SeedSequence`
spawn keys, so results never depend on batch layout or worker count.
"""
from __future__ import annotations

import numpy as np

# stream ids; stable so that coupled experiments share noise
STREAM_PATH = 0
STREAM_NOISE = 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``seed`` and spawn key ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
