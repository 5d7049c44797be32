"""Counter-based seed derivation.

Every random stream in the package is keyed by ``(master_seed, *keys)``
through ``numpy.random.SeedSequence`` spawn keys, so a stream never depends
on how many other streams were drawn before it.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def seed_sequence(master, *keys):
    return np.random.SeedSequence(int(master) & _MASK64, spawn_key=tuple(int(k) for k in keys))


def rng_for(master, *keys):
    return np.random.Generator(np.random.PCG64(seed_sequence(master, *keys)))


def derive_seed(master, *keys):
    """A 64-bit integer seed for a sub-stream."""
    return int(seed_sequence(master, *keys).generate_state(1, np.uint64)[0])
