"""Deterministic Gaussian noise stream.

The generator is part of the session file-format contract: golden sessions
must be reproducible bit-for-bit across builds and platforms, so both the
uniform source and the normal transform are pinned here rather than
delegated to a library whose stream may change between releases.

Uniform source: splitmix64 used as a counter-based generator. Draw i
hashes state seed + i * GOLDEN (mod 2^64). Normal transform: Box-Muller,
one normal per pair of uniforms (the sine branch is discarded so that each
normal consumes exactly two counter slots).
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def splitmix64(seed: int, count: int) -> np.ndarray:
    """Return `count` splitmix64 outputs for counters 1..count as uint64."""
    if count < 0:
        raise ValueError("count must be non-negative")
    ctr = np.arange(1, count + 1, dtype=np.uint64)
    z = _U64(seed & 0xFFFFFFFFFFFFFFFF) + ctr * _GOLDEN
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


def uniform_stream(seed: int, count: int) -> np.ndarray:
    """Uniform doubles in the open interval (0, 1), 53-bit resolution."""
    bits = splitmix64(seed, count)
    return ((bits >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal_stream(seed: int, count: int) -> np.ndarray:
    """Standard normal draws; draw i consumes uniforms (2i, 2i+1)."""
    u = uniform_stream(seed, 2 * count)
    u1 = u[0::2]
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
