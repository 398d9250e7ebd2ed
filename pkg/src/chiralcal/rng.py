"""Counter-based random streams keyed by (seed, stream name, index).

Every draw is a pure function of its key, so results do not depend on the
order in which pairs are processed or on which process does the work.
SplitMix64 is used as the mixing function.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)


def to_u64(seed: int) -> int:
    return int(seed) & _MASK64


def _splitmix(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        return z ^ (z >> np.uint64(31))


def stream_key(seed: int, name: str) -> int:
    tag = int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")
    key = _splitmix(np.array([to_u64(seed) ^ tag], dtype=np.uint64))
    return int(key[0])


def stream_bits(seed: int, name: str, index) -> np.ndarray:
    """64 random bits per entry of ``index`` (non-negative integers)."""
    idx = np.asarray(index, dtype=np.uint64)
    key = np.uint64(stream_key(seed, name))
    with np.errstate(over="ignore"):
        return _splitmix(_splitmix(idx * _GOLDEN ^ key))


def stream_uniform(seed: int, name: str, index) -> np.ndarray:
    """Uniform doubles in [0, 1), one per entry of ``index``."""
    bits = stream_bits(seed, name, index)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def derived_seed(seed: int, name: str) -> int:
    """A child seed for seeding a conventional generator."""
    return stream_key(seed, name)


def generator(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derived_seed(seed, name))
