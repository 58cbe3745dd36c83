"""GF(2) helpers for the permuted polar transform.

Bit vectors are plain ``uint8`` arrays of 0/1 along the last axis, so every
transform here also works on a batch of shape ``(..., 2N)``.  The packed
``uint64`` helpers at the bottom are for XOR-heavy enumeration code.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ShapeError(ValueError):
    """Raised when a vector length is not a power of two or sizes disagree."""


@dataclass(frozen=True)
class PolarConfig:
    block_len: int

    def __post_init__(self):
        if self.block_len < 2 or self.block_len & (self.block_len - 1):
            raise ShapeError(f"block length must be a power of two >= 2, got {self.block_len}")

    @property
    def n_stages(self) -> int:
        return self.block_len.bit_length() - 1


def n_stages_of(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise ShapeError(f"length {length} is not a power of two")
    return length.bit_length() - 1


@lru_cache(maxsize=None)
def _bitrev_cached(n_stages: int) -> np.ndarray:
    size = 1 << n_stages
    idx = np.arange(size)
    rev = np.zeros(size, dtype=np.int64)
    for b in range(n_stages):
        rev |= ((idx >> b) & 1) << (n_stages - 1 - b)
    rev.setflags(write=False)
    return rev


def bit_reversal_perm(n_stages: int) -> np.ndarray:
    """Permutation realised by P_{2N} = R_{2N}(I_2 (x) P_N), P_2 = I_2.

    Entry ``j`` is the column holding the single one in row ``j``; it equals
    the bit reversal of ``j`` over ``n_stages`` bits.
    """
    if n_stages < 1:
        raise ShapeError("n_stages must be >= 1")
    return _bitrev_cached(n_stages)


def _as_bits(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.uint8)
    if arr.ndim == 0:
        raise ShapeError("expected a bit vector")
    return arr


def _butterfly(x: np.ndarray) -> np.ndarray:
    # x <- x G^{(x)n}; G = [[1,0],[1,1]] makes the upper half absorb the lower
    length = x.shape[-1]
    lead = x.shape[:-1]
    out = x.copy()
    half = 1
    while half < length:
        view = out.reshape(lead + (length // (2 * half), 2, half))
        view[..., 0, :] ^= view[..., 1, :]
        half *= 2
    return out


def polar_transform(l) -> np.ndarray:
    """u = l P G^{(x)n} over GF(2)."""
    l = _as_bits(l)
    n = n_stages_of(l.shape[-1])
    if n == 0:
        raise ShapeError("block length must be at least 2")
    return _butterfly(l[..., bit_reversal_perm(n)])


def inverse_polar(u) -> np.ndarray:
    """l = u (P G^{(x)n})^{-1} = u G^{(x)n} P."""
    u = _as_bits(u)
    n = n_stages_of(u.shape[-1])
    if n == 0:
        raise ShapeError("block length must be at least 2")
    return _butterfly(u)[..., bit_reversal_perm(n)]


def row_weight(i: int, n_stages: int) -> int:
    """Hamming weight of row ``i`` of the inverse generator: 2^popcount(i)."""
    if not 0 <= i < (1 << n_stages):
        raise IndexError(f"row {i} outside block of length {1 << n_stages}")
    return 1 << bin(i).count("1")


def dense_kernel_power(n_stages: int) -> np.ndarray:
    """G^{(x)n} as a dense 0/1 matrix.  Test oracle only."""
    g = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    out = np.ones((1, 1), dtype=np.uint8)
    for _ in range(n_stages):
        out = np.kron(out, g) % 2
    return out.astype(np.uint8)


def dense_permutation(n_stages: int) -> np.ndarray:
    """P_{2N} built from its recursive definition.  Test oracle only."""
    p = np.eye(2, dtype=np.uint8)
    size = 2
    for _ in range(1, n_stages):
        size *= 2
        # R separates even-indexed components (first) from odd-indexed ones
        r = np.zeros((size, size), dtype=np.uint8)
        for k in range(size // 2):
            r[2 * k, k] = 1
            r[2 * k + 1, size // 2 + k] = 1
        p = (r @ np.kron(np.eye(2, dtype=np.uint8), p)) % 2
    return p.astype(np.uint8)


def dense_generator(n_stages: int) -> np.ndarray:
    """G_p = P G^{(x)n}.  Test oracle only."""
    return (dense_permutation(n_stages).astype(np.int64) @ dense_kernel_power(n_stages)) % 2


def gf2_matmul(a, b) -> np.ndarray:
    return (np.asarray(a, dtype=np.int64) @ np.asarray(b, dtype=np.int64) % 2).astype(np.uint8)


# -- packed words -----------------------------------------------------------

def pack_bits(bits) -> np.ndarray:
    """Pack ``(..., L)`` bits into ``(..., ceil(L/64))`` uint64 words, LSB first."""
    bits = _as_bits(bits)
    length = bits.shape[-1]
    n_words = (length + 63) // 64
    padded = np.zeros(bits.shape[:-1] + (n_words * 64,), dtype=np.uint64)
    padded[..., :length] = bits
    padded = padded.reshape(bits.shape[:-1] + (n_words, 64))
    shifts = np.arange(64, dtype=np.uint64)
    return np.bitwise_or.reduce(padded << shifts, axis=-1)


def packed_weight(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)
