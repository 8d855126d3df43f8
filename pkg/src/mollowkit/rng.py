"""Seeded counter-based random generators."""

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int, None or a SeedSequence (e.g. a spawned child)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
