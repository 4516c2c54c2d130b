"""Portable counter-based random numbers (SplitMix64).

The generator is fully defined by its recurrence, so a given seed yields the
same stream on every platform::

    state_i = key + (i + 1) * 0x9E3779B97F4A7C15        (mod 2**64)
    z = state_i
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9            (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB            (mod 2**64)
    out_i = z ^ (z >> 31)

Uniform doubles take the top 53 bits: ``u = (out >> 11) * 2**-53``.
Sub-streams are addressed by a path of integers (for example seed and
replicate index) folded into the key with :func:`derive_key`, so results do
not depend on the order in which streams are consumed.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(*path: int) -> int:
    """Fold a path of integers into a 64-bit stream key."""
    key = 0
    for part in path:
        key = mix64((key + GAMMA * ((int(part) & MASK64) + 1)) & MASK64)
    return key


def raw_stream(key: int, count: int, offset: int = 0) -> np.ndarray:
    """``count`` 64-bit outputs of the stream ``key`` starting at ``offset``."""
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key & MASK64) + idx * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniform(key: int, count: int, offset: int = 0) -> np.ndarray:
    """Uniform doubles in [0, 1)."""
    bits = raw_stream(key, count, offset) >> np.uint64(11)
    return bits.astype(np.float64) * (2.0**-53)


def integers(key: int, count: int, high: int, offset: int = 0) -> np.ndarray:
    """Integers in ``[0, high)`` by scaling a uniform double (bias below 2**-40 for high < 2**13)."""
    return np.floor(uniform(key, count, offset) * high).astype(np.int64)


def normal(key: int, count: int, offset: int = 0) -> np.ndarray:
    """Standard normals by Box-Muller, consuming two uniforms per value."""
    u = uniform(key, 2 * count, offset)
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    return radius * np.cos(2.0 * np.pi * u2)
