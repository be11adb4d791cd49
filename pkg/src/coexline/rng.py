"""Per-replica random streams derived from a 64-bit master seed.

Replica ``i`` of a run with master seed ``s`` draws from
``numpy.random.Generator(PCG64(mix64(s, i)))``.  ``mix64`` is bit-exact:

    splitmix64(x):
        x = (x + 0x9E3779B97F4A7C15) mod 2**64
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) mod 2**64
        return x ^ (x >> 31)

    mix64(seed, index) = splitmix64(splitmix64(seed) ^ index)

Because splitmix64 is a bijection on 64-bit words, distinct replica indices
under one master seed always receive distinct stream seeds.  A replica's
stream never depends on how replicas are grouped into chunks or workers.
"""

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix64(seed: int, index: int) -> int:
    """Stream seed for replica ``index`` under master ``seed``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    return splitmix64(splitmix64(seed & _MASK) ^ (index & _MASK))


def replica_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(mix64(seed, index)))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
