"""Deterministic random number generation.

Every seeded draw in this package goes through SplitMix64 so that results are
reproducible bit-for-bit across platforms and across reimplementations in
other languages. The generator is the one published by Sebastiano Vigna
(public domain): state advances by the 64-bit golden-gamma constant
0x9E3779B97F4A7C15 and each output is the finalizer

    z  = state
    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    return z ^ (z >> 31)

with all arithmetic modulo 2**64.

Sub-seeds for independent draws (per sample, per repeat, per strategy) are
derived by hashing the parts with SHA-256 and taking the first 8 bytes
big-endian, see `derive_seed`.
"""

from __future__ import annotations

import hashlib
from typing import Sequence, Union

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """64-bit splittable generator; tiny, portable, and fast enough here."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Unbiased draw in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        # largest multiple of bound that fits in 64 bits
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % bound

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def choice(self, seq: Sequence):
        if len(seq) == 0:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.below(len(seq))]

    def indices_without_replacement(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in draw order (partial Fisher-Yates)."""
        if k < 0 or k > n:
            raise ValueError(f"cannot draw {k} distinct indices from {n}")
        pool = list(range(n))
        out = []
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
            out.append(pool[i])
        return out


def derive_seed(base_seed: int, *parts: Union[str, int]) -> int:
    """Stable 64-bit sub-seed from a base seed and a label path.

    Parts are joined with an unambiguous separator so ("ab", "c") and
    ("a", "bc") derive different seeds.
    """
    h = hashlib.sha256()
    h.update(str(int(base_seed)).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        if isinstance(part, bool) or not isinstance(part, (str, int)):
            raise TypeError(f"seed parts must be str or int, got {type(part).__name__}")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")
