"""Seeded, splittable SplitMix64 generator.

Every randomized step in binsight draws from this generator rather than
from ``random`` or ``numpy.random`` so that results are reproducible across
platforms, library versions, thread counts and kernel backends.  The
compiled tree kernel carries a C copy of ``next_u64``/``randbelow``; the two
must stay in lockstep.

Algorithm
---------
State is one unsigned 64-bit word.  Each step adds the golden-ratio
increment ``0x9E3779B97F4A7C15`` and returns ``mix64(state)`` where
``mix64`` is the Stafford variant-13 finalizer used by SplitMix64.

Streams are derived, never shared: ``derive(seed, i, j, ...)`` folds each
index into the seed through ``mix64`` so stream ``(seed, 3)`` and stream
``(seed, 4)`` are statistically independent.

Bounded integers use rejection sampling on the low residue so they are
exactly uniform.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_STREAM_MULT = 0xD1B54A32D192ED03


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive(seed: int, *path: int) -> int:
    """Return the 64-bit stream seed for ``seed`` refined by ``path``."""
    s = mix64(seed & MASK64)
    for index in path:
        s = mix64(s ^ (((index & MASK64) * _STREAM_MULT + GOLDEN) & MASK64))
    return s


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream.  ``Rng(derive(seed, k))`` is the idiomatic use."""

    __slots__ = ("state",)

    def __init__(self, state: int = 0):
        self.state = state & MASK64

    @classmethod
    def stream(cls, seed: int, *path: int) -> "Rng":
        return cls(derive(seed, *path))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def u64_array(self, count: int) -> np.ndarray:
        """The next ``count`` outputs, vectorized; advances the state."""
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GOLDEN)
            out = _mix64_array(states)
        self.state = (self.state + count * GOLDEN) & MASK64
        return out

    def randbelow_array(self, n: int, count: int) -> np.ndarray:
        """``count`` successive ``randbelow(n)`` draws, as int64.

        Equivalent draw-for-draw to calling :meth:`randbelow` in a loop.
        """
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        threshold = ((1 << 64) - n) % n
        if count == 0:
            return np.empty(0, dtype=np.int64)
        start = self.state
        raw = self.u64_array(count)
        if threshold == 0 or not (raw < np.uint64(threshold)).any():
            return (raw % np.uint64(n)).astype(np.int64)
        # A rejection happened (probability ~n/2**64): replay sequentially.
        self.state = start
        return np.fromiter((self.randbelow(n) for _ in range(count)),
                           dtype=np.int64, count=count)

    def random_array(self, count: int) -> np.ndarray:
        raw = self.u64_array(count)
        return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, highest index first."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> np.ndarray:
        items = list(range(n))
        self.shuffle(items)
        return np.asarray(items, dtype=np.int64)

    def sample(self, n: int, k: int) -> list[int]:
        """``k`` distinct values from ``range(n)`` via partial Fisher-Yates.

        Position ``i`` swaps with ``i + randbelow(n - i)``; the compiled
        kernel performs exactly the same draws.
        """
        if not 0 <= k <= n:
            raise ValueError("sample size out of range")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
