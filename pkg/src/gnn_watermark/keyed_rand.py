"""Keyed, platform-independent pseudo-randomness.

Every random choice that must be reproducible from an owner's secret key
(trigger structure, trigger features, watermark labels) is drawn from a
:class:`RandomStream`.  The generator is xoshiro256** seeded through a
splitmix64 expansion, and keys are hashed to seeds with FNV-1a-64, so a
trigger regenerated years later on another machine is bit-identical.
"""

from __future__ import annotations

from typing import List, Union

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

_TWO_POW_53 = float(1 << 53)


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def _as_bytes(key: Union[bytes, str]) -> bytes:
    if isinstance(key, str):
        return key.encode("utf-8")
    return bytes(key)


def derive_seed(key: Union[bytes, str], context: str) -> int:
    """Hash ``key || 0x00 || context`` to a 64-bit seed.

    Distinct contexts ("edges", "features", "labels", ...) give independent
    streams from one key.
    """
    key = _as_bytes(key)
    if not key:
        raise ValueError("key must be non-empty")
    return fnv1a_64(key + b"\x00" + context.encode("utf-8"))


def key_fingerprint(key: Union[bytes, str]) -> int:
    """64-bit fingerprint stored alongside a trigger; does not reveal the key."""
    return derive_seed(key, "fingerprint")


def seed_bytes(seed: int) -> bytes:
    return int(seed & MASK64).to_bytes(8, "little")


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class RandomStream:
    """xoshiro256** generator.  Single owner; never share between workers."""

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        sm = seed & MASK64
        words = []
        for _ in range(4):
            sm = (sm + 0x9E3779B97F4A7C15) & MASK64
            z = sm
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            words.append(z ^ (z >> 31))
        self._s0, self._s1, self._s2, self._s3 = words

    @classmethod
    def from_key(cls, key: Union[bytes, str], context: str) -> "RandomStream":
        return cls(derive_seed(key, context))

    @classmethod
    def from_state(cls, state) -> "RandomStream":
        obj = cls.__new__(cls)
        obj._s0, obj._s1, obj._s2, obj._s3 = (int(w) & MASK64 for w in state)
        return obj

    @property
    def state(self):
        return (self._s0, self._s1, self._s2, self._s3)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def next_float(self) -> float:
        """Uniform real in [0, 1) from the top 53 bits of the next output."""
        return (self.next_u64() >> 11) / _TWO_POW_53

    def floats(self, count: int) -> np.ndarray:
        """``count`` consecutive :meth:`next_float` draws as an array."""
        # Inlined copy of next_u64 for speed; must stay in lockstep with it.
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        out = [0] * count
        for i in range(count):
            x = (s1 * 5) & MASK64
            out[i] = ((((x << 7) | (x >> 57)) * 9) & MASK64) >> 11
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return np.array(out, dtype=np.float64) / _TWO_POW_53

    def below(self, bound: int) -> int:
        """Index in [0, bound) as floor(next_float * bound)."""
        return int(self.next_float() * bound)


def sample_distinct(stream: RandomStream, population: int, k: int) -> List[int]:
    """Draw ``k`` distinct indices from ``range(population)``.

    Partial Fisher-Yates: slot ``i`` swaps with ``i + floor(u * (population - i))``
    and the value landing in slot ``i`` is emitted.
    """
    if k < 0 or population < 0:
        raise ValueError("population and k must be non-negative")
    if k > population:
        raise ValueError(f"cannot draw {k} distinct items from {population}")
    if k == 0:
        return []
    u = stream.floats(k)
    arr = np.arange(population, dtype=np.int64)
    remaining = population - np.arange(k)
    offsets = (u * remaining).astype(np.int64)
    for i in range(k):
        j = i + int(offsets[i])
        arr[i], arr[j] = arr[j], arr[i]
    return arr[:k].tolist()
