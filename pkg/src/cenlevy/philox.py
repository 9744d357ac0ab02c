"""Counter-based RNG (Philox4x32-10) with one independent stream per path.

Every simulated path gets its own stream keyed by (seed, path_index), so
results are reproducible regardless of scheduling, batching, or backend:
the compiled core, the vectorized fallback, and the scalar reference all
consume the identical word sequence for a given path.

Stream key: key64 = splitmix64(splitmix64(seed) + path_index), split into
two 32-bit key words.  Blocks of four 32-bit words are generated from a
64-bit block counter placed in the low counter words; uniforms are
word * 2^-32 in [0, 1).
"""
from __future__ import annotations

import numpy as np

__all__ = ["splitmix64", "stream_key64", "philox_block", "PhiloxStreams", "ScalarPhilox"]

MASK32 = 0xFFFFFFFF
MASK64 = 0xFFFFFFFFFFFFFFFF

PHILOX_M0 = 0xD2511F53
PHILOX_M1 = 0xCD9E8D57
PHILOX_W0 = 0x9E3779B9
PHILOX_W1 = 0xBB67AE85

_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_M1 = 0xBF58476D1CE4E5B9
_SM_M2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    z = (x + _SM_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _SM_M1) & MASK64
    z = ((z ^ (z >> 27)) * _SM_M2) & MASK64
    return z ^ (z >> 31)


def stream_key64(seed: int, path_index: int) -> int:
    return splitmix64((splitmix64(seed & MASK64) + path_index) & MASK64)


def _splitmix64_vec(x: np.ndarray) -> np.ndarray:
    z = (x + np.uint64(_SM_GAMMA))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_SM_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_SM_M2)
    return z ^ (z >> np.uint64(31))


def philox_block(k0, k1, block):
    """One Philox4x32-10 block per stream; returns four uint32 word arrays.

    Counter words are (low32(block), high32(block), 0, 0).
    """
    k0 = np.asarray(k0, dtype=np.uint32).copy()
    k1 = np.asarray(k1, dtype=np.uint32).copy()
    block = np.asarray(block, dtype=np.uint64)
    c0 = (block & np.uint64(MASK32)).astype(np.uint32)
    c1 = (block >> np.uint64(32)).astype(np.uint32)
    c2 = np.zeros_like(c0)
    c3 = np.zeros_like(c0)
    m0 = np.uint64(PHILOX_M0)
    m1 = np.uint64(PHILOX_M1)
    for _ in range(10):
        p0 = c0.astype(np.uint64) * m0
        p1 = c2.astype(np.uint64) * m1
        lo0 = (p0 & np.uint64(MASK32)).astype(np.uint32)
        hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
        lo1 = (p1 & np.uint64(MASK32)).astype(np.uint32)
        hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = k0 + np.uint32(PHILOX_W0)
        k1 = k1 + np.uint32(PHILOX_W1)
    return c0, c1, c2, c3


class PhiloxStreams:
    """Lockstep uniform generator: one independent stream per path index."""

    def __init__(self, seed: int, path_indices):
        idx = np.asarray(path_indices, dtype=np.uint64)
        base = np.uint64(splitmix64(int(seed) & MASK64))
        key64 = _splitmix64_vec(base + idx)
        self.k0 = (key64 & np.uint64(MASK32)).astype(np.uint32)
        self.k1 = (key64 >> np.uint64(32)).astype(np.uint32)
        self.block = np.zeros(idx.shape, dtype=np.uint64)
        self._buf = np.empty(idx.shape + (4,), dtype=np.float64)
        self._pos = np.full(idx.shape, 4, dtype=np.int64)

    def __len__(self) -> int:
        return self.k0.shape[0]

    def next(self) -> np.ndarray:
        """One uniform in [0, 1) per stream."""
        need = self._pos >= 4
        if np.any(need):
            w0, w1, w2, w3 = philox_block(
                self.k0[need], self.k1[need], self.block[need]
            )
            scale = 2.0**-32
            self._buf[need, 0] = w0 * scale
            self._buf[need, 1] = w1 * scale
            self._buf[need, 2] = w2 * scale
            self._buf[need, 3] = w3 * scale
            self.block[need] += np.uint64(1)
            self._pos[need] = 0
        out = self._buf[np.arange(len(self)), self._pos]
        self._pos += 1
        return out

    def compact(self, keep) -> None:
        """Drop finished streams; keep is an index or boolean array."""
        self.k0 = self.k0[keep]
        self.k1 = self.k1[keep]
        self.block = self.block[keep]
        self._buf = self._buf[keep]
        self._pos = self._pos[keep]


class ScalarPhilox:
    """Pure-Python twin of one stream, for the reference backend."""

    def __init__(self, seed: int, path_index: int):
        key64 = stream_key64(seed, path_index)
        self.k0 = key64 & MASK32
        self.k1 = (key64 >> 32) & MASK32
        self.block = 0
        self._buf: list = []

    def _fill(self) -> None:
        c = [self.block & MASK32, (self.block >> 32) & MASK32, 0, 0]
        k0, k1 = self.k0, self.k1
        for _ in range(10):
            p0 = (c[0] * PHILOX_M0) & MASK64
            p1 = (c[2] * PHILOX_M1) & MASK64
            c = [
                ((p1 >> 32) ^ c[1] ^ k0) & MASK32,
                p1 & MASK32,
                ((p0 >> 32) ^ c[3] ^ k1) & MASK32,
                p0 & MASK32,
            ]
            k0 = (k0 + PHILOX_W0) & MASK32
            k1 = (k1 + PHILOX_W1) & MASK32
        self.block += 1
        self._buf = [c[3], c[2], c[1], c[0]]  # pop() returns w0 first

    def next_word(self) -> int:
        if not self._buf:
            self._fill()
        return self._buf.pop()

    def next_uniform(self) -> float:
        return self.next_word() * 2.0**-32
