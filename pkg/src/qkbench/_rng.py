"""Counter-based PRNG used for every randomised choice in the benchmark.

SplitMix64 is a tiny, well-studied 64-bit generator whose output depends only
on integer arithmetic, so fold assignments, subsamples and factor inits are
reproducible across platforms and numpy versions.
"""
from __future__ import annotations

import hashlib

_MASK = (1 << 64) - 1


class SplitMix64:
    """64-bit splitmix stream. Deterministic given the integer seed."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = _MASK - (_MASK % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (self.next_u64() / 2.0**64) * (hi - lo)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, *parts) -> int:
    """Derive an independent stream seed from a base seed and context tokens."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *parts) -> SplitMix64:
    return SplitMix64(derive_seed(seed, *parts))
