"""Deterministic seed derivation.

Every random stream in the package is a pure function of
(master seed, purpose label, index), so adding a new purpose never
perturbs existing streams.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(s: str) -> int:
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return h


def derive_seed(master: int, label: str, index: int = 0) -> int:
    # int() guards against numpy integer overflow in the 64-bit arithmetic
    master, index = int(master), int(index)
    s = splitmix64((master & _MASK64) ^ fnv1a64(label))
    return splitmix64((s + (index & _MASK64)) & _MASK64)


def rng_for(master: int, label: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, label, index)))
