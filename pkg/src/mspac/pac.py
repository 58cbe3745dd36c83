"""Rate-one convolutional precoder and the per-level PAC source encoder."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from .gf2 import ShapeError, polar_transform

# c(D) = 1 + D^2 + D^3 + D^5 + D^6
DEFAULT_POLY = (1, 0, 1, 1, 0, 1, 1)


@dataclass(frozen=True)
class ConvPoly:
    coeffs: tuple[int, ...]

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if not coeffs or any(c not in (0, 1) for c in coeffs):
            raise ValueError(f"polynomial coefficients must be bits, got {self.coeffs}")
        if coeffs[0] != 1 or coeffs[-1] != 1:
            raise ValueError("generator polynomial needs c_0 = c_d = 1")

    @classmethod
    def identity(cls) -> "ConvPoly":
        return cls((1,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def constraint_len(self) -> int:
        return len(self.coeffs)

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=np.uint8)

    def __str__(self):
        return "".join(map(str, self.coeffs))


DEFAULT_CONV = ConvPoly(DEFAULT_POLY)


@dataclass(frozen=True)
class LevelCode:
    """Frozen/key split of one level; both sets ascending."""

    block_len: int
    key_set: tuple[int, ...]

    def __post_init__(self):
        keys = tuple(sorted(int(k) for k in self.key_set))
        if len(set(keys)) != len(keys) or (keys and not 0 <= keys[0] <= keys[-1] < self.block_len):
            raise ShapeError("key set must hold distinct indices inside the block")
        object.__setattr__(self, "key_set", keys)

    @cached_property
    def frozen_set(self) -> tuple[int, ...]:
        keys = set(self.key_set)
        return tuple(i for i in range(self.block_len) if i not in keys)

    @property
    def n_key(self) -> int:
        return len(self.key_set)

    def key_mask(self) -> np.ndarray:
        return self._mask

    @cached_property
    def _mask(self) -> np.ndarray:
        mask = np.zeros(self.block_len, dtype=bool)
        mask[list(self.key_set)] = True
        mask.setflags(write=False)
        return mask


def convolve(u, poly: ConvPoly) -> np.ndarray:
    """v_n = XOR_{m <= min(d, n)} c_m u_{n-m} along the last axis."""
    u = np.asarray(u, dtype=np.uint8)
    v = np.zeros_like(u)
    length = u.shape[-1]
    for m, c in enumerate(poly.coeffs):
        if c and m < length:
            v[..., m:] ^= u[..., : length - m]
    return v


@njit(cache=True)
def _deconv_rows(u, taps):
    for r in range(u.shape[0]):
        for n in range(1, u.shape[1]):
            for m in taps:
                if m > n:
                    break
                u[r, n] ^= u[r, n - m]


def deconvolve(v, poly: ConvPoly) -> np.ndarray:
    """Invert :func:`convolve` with u_n = v_n XOR XOR_{m>=1} c_m u_{n-m}."""
    v = np.asarray(v, dtype=np.uint8)
    u = v.copy()
    taps = np.array([m for m, c in enumerate(poly.coeffs) if c and m > 0], dtype=np.int64)
    if taps.size and v.size:
        flat = u.reshape(-1, v.shape[-1])
        _deconv_rows(flat, taps)
        u = flat.reshape(v.shape)
    return u


def inverse_toeplitz_coeffs(poly: ConvPoly, length: int) -> np.ndarray:
    """First row c'_0..c'_{len-1} of the inverse Toeplitz precoder."""
    c = poly.coeffs
    out = np.zeros(length, dtype=np.uint8)
    if length:
        out[0] = 1
    for n in range(1, length):
        acc = 0
        for m in range(1, min(poly.degree, n) + 1):
            acc ^= c[m] & out[n - m]
        out[n] = acc
    return out


def toeplitz_matrix(coeffs, length: int) -> np.ndarray:
    """Upper-triangular Toeplitz matrix with first row ``coeffs`` (zero padded)."""
    row = np.zeros(length, dtype=np.uint8)
    k = min(len(coeffs), length)
    row[:k] = np.asarray(coeffs, dtype=np.uint8)[:k]
    mat = np.zeros((length, length), dtype=np.uint8)
    for i in range(length):
        mat[i, i:] = row[: length - i]
    return mat


def encode_level(l_q, poly: ConvPoly, code: LevelCode):
    """Return ``(v, f, s)``: precoded word, message bits and key bits."""
    l_q = np.asarray(l_q, dtype=np.uint8)
    if l_q.shape[-1] != code.block_len:
        raise ShapeError(f"level word has length {l_q.shape[-1]}, code expects {code.block_len}")
    v = convolve(polar_transform(l_q), poly)
    mask = code.key_mask()
    return v, v[..., ~mask], v[..., mask]
