"""Deterministic cross-platform random streams built on splitmix64.

Every random quantity in this package (projection blocks, model inits,
synthetic datasets, batch order) is drawn from a `SplitMix64` stream so that
a (seed, shape) pair reconstructs bit-identical values on any platform.

The generator is counter-based: output ``i`` of a stream seeded with ``s``
is ``finalize((s + (i+1)*GOLDEN) mod 2^64)`` where ``finalize`` is the
splitmix64 output function.  That identity makes bulk generation a pure
vectorized uint64 computation, with the scalar path agreeing exactly.
"""

from __future__ import annotations

import math

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

_U64_GOLDEN = np.uint64(GOLDEN)
_U64_MUL1 = np.uint64(_MUL1)
_U64_MUL2 = np.uint64(_MUL2)
_TWO_NEG_53 = 2.0 ** -53


def finalize(z: int) -> int:
    """splitmix64 output function on a 64-bit integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def mix(seed: int, k: int) -> int:
    """Derive the seed of sub-stream ``k`` from ``seed``.

    Equals the k-th output of a splitmix64 stream seeded with ``seed``,
    so sub-stream seeds are themselves well-mixed 64-bit values.
    """
    return finalize((seed + ((k + 1) & MASK64) * GOLDEN) & MASK64)


def _finalize_vec(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _U64_MUL1
    z = z ^ (z >> np.uint64(27))
    z = z * _U64_MUL2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """A single deterministic stream of 64-bit outputs with derived samplers.

    Draw accounting is part of the contract: ``uniforms(k)`` consumes k
    outputs, ``normals(k)`` consumes 2k, ``signs(k)`` consumes k, and
    rejection-sampled draws (``randbelow``, ``permutation``) consume one
    output per attempt.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._count = 0

    def _block(self, k: int) -> np.ndarray:
        """Next k raw outputs as a uint64 array, advancing the counter."""
        if k < 0:
            raise ValueError("draw count must be nonnegative")
        idx = np.arange(self._count + 1, self._count + k + 1, dtype=np.uint64)
        self._count += k
        state = np.uint64(self.seed) + idx * _U64_GOLDEN
        return _finalize_vec(state)

    def next_u64(self) -> int:
        self._count += 1
        return finalize((self.seed + self._count * GOLDEN) & MASK64)

    def u64(self, k: int) -> np.ndarray:
        return self._block(k)

    def uniforms(self, k: int) -> np.ndarray:
        """k doubles in [0, 1) from the high 53 bits of each output."""
        return (self._block(k) >> np.uint64(11)).astype(np.float64) * _TWO_NEG_53

    def normals(self, k: int) -> np.ndarray:
        """k standard normals via Box-Muller, two outputs per normal.

        z = sqrt(-2 ln u1) * cos(2 pi u2) with u1 in (0, 1], so the log
        is always finite.
        """
        raw = self._block(2 * k)
        hi = (raw >> np.uint64(11)).astype(np.float64)
        u1 = (hi[0::2] + 1.0) * _TWO_NEG_53
        u2 = hi[1::2] * _TWO_NEG_53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)

    def signs(self, k: int) -> np.ndarray:
        """k values in {-1.0, +1.0}, equiprobable, from the top bit."""
        top = self._block(k) >> np.uint64(63)
        return 1.0 - 2.0 * top.astype(np.float64)

    def randbelow(self, bound: int) -> int:
        """Uniform integer in [0, bound) via bounded rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def randints(self, bound: int, k: int) -> np.ndarray:
        """k uniform integers in [0, bound) by scaling 53-bit uniforms.

        Modulo-free and vectorized; the deviation from exact uniformity is
        O(bound / 2^53), negligible for the small bounds used here.
        """
        u = self.uniforms(k)
        return np.minimum((u * bound).astype(np.int64), bound - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n) using randbelow draws."""
        perm = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
