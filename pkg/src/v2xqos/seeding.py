"""Deterministic seed derivation shared by every randomized component."""

from __future__ import annotations

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Mix ``seed`` with integer ``keys`` into a 63-bit child seed.

    The result depends only on the arguments, so work units can be seeded
    independently of scheduling order.
    """
    state = splitmix64(seed & _MASK)
    for key in keys:
        state = splitmix64(state ^ (int(key) & _MASK))
    return state >> 1
