"""Counter-based random streams.

Every sample owns a substream addressed by (seed, stream id, sample index).
Python-level code uses numpy's Philox with the sample index in the counter;
numba kernels use xoshiro256** seeded by splitmix64 on the same triple.
Either way, results do not depend on chunking or on the number of workers.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

__all__ = ["substream", "kernel_state", "next_u64", "uniform", "exponential", "STREAM_IDS"]

STREAM_IDS = {
    "bcgwt": 1,
    "sbbcgwt": 2,
    "excursion": 3,
    "gamma": 4,
    "diffusion": 5,
    "literal": 6,
}

_MASK64 = (1 << 64) - 1


def substream(seed: int, stream: int, index: int) -> np.random.Generator:
    """Generator for sample ``index`` of stream ``stream`` under ``seed``."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, int(index) & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


@nb.njit(cache=True, inline="always")
def _splitmix(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def kernel_state(seed, stream, index):
    """xoshiro256** state for one sample."""
    s = np.empty(4, dtype=np.uint64)
    x = np.uint64(seed)
    x, a = _splitmix(x)
    x = a ^ (np.uint64(stream) * np.uint64(0xD1B54A32D192ED03))
    x, b = _splitmix(x)
    x = b ^ (np.uint64(index) * np.uint64(0xAEF17502108EF2D9))
    for i in range(4):
        x, s[i] = _splitmix(x)
    return s


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True)
def uniform(s):
    """Uniform on (0, 1): 53 random bits, never exactly 0."""
    return (float(next_u64(s) >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def exponential(s):
    return -math.log(uniform(s))
