"""Deterministic seed derivation so every sampling stage owns an independent,
reproducible random stream."""

import numpy as np


def derive_seed(*parts):
    """Hash integer parts (master seed, indices, ...) into a 64-bit seed."""
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def spawn_seeds(seed, n):
    """n child seeds of a master seed; child i depends only on (seed, i)."""
    return [int(c.generate_state(1, np.uint64)[0]) for c in np.random.SeedSequence(int(seed)).spawn(n)]
