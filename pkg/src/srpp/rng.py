"""Deterministic random-stream derivation.

All randomness in the package flows from 64-bit seeds through the
counter-based Philox generator, so results are reproducible across runs
and platforms.  Independent streams are derived by seeding Philox with
the tuple ``(seed, *stream)``; the same tuple always yields the same
stream.
"""

import numpy as np


def rng_stream(seed: int, *stream: int) -> np.random.Generator:
    """Return a Generator for the derived stream ``(seed, *stream)``."""
    ss = np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
