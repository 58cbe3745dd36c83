"""Successive-cancellation (list) decoding of source PAC levels.

The decoder works on x = u G^{(x)n}, the unpermuted polar codeword; the
source LLRs of l are mapped onto x through the bit-reversal permutation
(x_j = l_{br(j)}).  Frozen positions are dynamic: at a frozen index the path
is forced to u_n = f_n XOR sum_{m>=1} c_m u_{n-m}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .gf2 import ShapeError, bit_reversal_perm, inverse_polar, n_stages_of, polar_transform
from .llr import LLR_MAX, PosteriorParams, level_llrs, posterior_matrix
from .pac import ConvPoly, LevelCode, convolve, deconvolve
from .source import QuantizerSpec


@njit(cache=True, nogil=True)
def _f(a, b):
    s = 1.0 if (a >= 0.0) == (b >= 0.0) else -1.0
    return s * min(abs(a), abs(b)) + np.log1p(np.exp(-abs(a + b))) - np.log1p(np.exp(-abs(a - b)))


@njit(cache=True)
def _f_array(a, b):
    # same scalar kernel as the list decoder, so leaf LLRs agree to the last bit
    out = np.empty_like(a)
    for k in range(a.shape[0]):
        out[k] = _f(a[k], b[k])
    return out


@njit(cache=True, nogil=True)
def _penalty(u, llr):
    x = llr if u == 0 else -llr
    if x >= 0.0:
        return np.log1p(np.exp(-x))
    return -x + np.log1p(np.exp(x))


@njit(cache=True, nogil=True)
def _leaf_llr(alpha, beta, chan, p, j, n, big_n):
    # walk from the deepest node shared with leaf j-1 down to leaf j
    if j == 0:
        start = 0
    else:
        tz = 0
        while not (j >> tz) & 1:
            tz += 1
        start = n - 1 - tz
    for d in range(start, n):
        half = big_n >> (d + 1)
        child = big_n - (big_n >> d)  # offset of depth d+1
        parent = big_n - (big_n >> (d - 1)) if d > 0 else 0
        go_right = (j >> (n - 1 - d)) & 1
        boff = big_n - (big_n >> d)  # offset of beta_left[d]
        for k in range(half):
            if d == 0:
                a = chan[k]
                b = chan[k + half]
            else:
                a = alpha[p, parent + k]
                b = alpha[p, parent + k + half]
            if go_right:
                alpha[p, child + k] = b + a if beta[p, boff + k] == 0 else b - a
            else:
                alpha[p, child + k] = _f(a, b)
    return alpha[p, big_n - 2] if n > 0 else chan[0]


@njit(cache=True, nogil=True)
def _push_bit(beta, scratch, p, j, bit, n, big_n):
    # fold the decided leaf upward until it lands as a left child
    scratch[0] = bit
    length = 1
    for d in range(n - 1, -1, -1):
        boff = big_n - (big_n >> d)
        if ((j >> (n - 1 - d)) & 1) == 0:
            for k in range(length):
                beta[p, boff + k] = scratch[k]
            return
        for k in range(length):
            scratch[k + length] = scratch[k]
            scratch[k] = beta[p, boff + k] ^ scratch[k]
        length *= 2


@njit(cache=True, nogil=True)
def _scl_kernel(chan, is_key, frozen_val, taps, list_size):
    big_n = chan.shape[0]
    n = 0
    while (1 << n) < big_n:
        n += 1
    cap = list_size
    alpha = np.zeros((cap, big_n))
    beta = np.zeros((cap, big_n), dtype=np.uint8)
    u = np.zeros((cap, big_n), dtype=np.uint8)
    pm = np.zeros(cap)
    scratch = np.zeros(big_n, dtype=np.uint8)
    lam = np.zeros(cap)
    cand_pm = np.zeros(2 * cap)
    # slots[r] is the storage row of the r-th live path
    slots = np.arange(cap)
    n_child = np.zeros(cap, dtype=np.int64)
    child_bit = np.zeros(cap, dtype=np.int64)
    free = np.zeros(cap, dtype=np.int64)
    new_slots = np.zeros(cap, dtype=np.int64)
    active = 1
    for j in range(big_n):
        for r in range(active):
            p = slots[r]
            lam[p] = _leaf_llr(alpha, beta, chan, p, j, n, big_n)
        if not is_key[j]:
            for r in range(active):
                p = slots[r]
                b = frozen_val[j]
                for m in taps:
                    if m <= j:
                        b ^= u[p, j - m]
                u[p, j] = b
                pm[p] += _penalty(b, lam[p])
                _push_bit(beta, scratch, p, j, b, n, big_n)
            continue
        n_cand = 2 * active
        for r in range(active):
            p = slots[r]
            cand_pm[2 * r] = pm[p] + _penalty(0, lam[p])
            cand_pm[2 * r + 1] = pm[p] + _penalty(1, lam[p])
        order = np.argsort(cand_pm[:n_cand], kind="mergesort")
        keep = min(n_cand, list_size)
        for r in range(active):
            n_child[r] = 0
        for k in range(keep):
            c = order[k]
            n_child[c // 2] += 1
            child_bit[c // 2] = c % 2
        # storage rows released by dropped paths, then never-used rows
        n_free = 0
        for r in range(active):
            if n_child[r] == 0:
                free[n_free] = slots[r]
                n_free += 1
        for s in range(active, cap):
            free[n_free] = slots[s]
            n_free += 1
        n_new = 0
        fi = 0
        for r in range(active):
            p = slots[r]
            if n_child[r] == 0:
                continue
            if n_child[r] == 1:
                b = child_bit[r]
                u[p, j] = b
                pm[p] = cand_pm[2 * r + b]
                new_slots[n_new] = p
                n_new += 1
                continue
            q = free[fi]
            fi += 1
            alpha[q, :] = alpha[p, :]
            beta[q, :] = beta[p, :]
            u[q, :] = u[p, :]
            u[p, j] = 0
            pm[p] = cand_pm[2 * r]
            u[q, j] = 1
            pm[q] = cand_pm[2 * r + 1]
            new_slots[n_new] = p
            new_slots[n_new + 1] = q
            n_new += 2
        used = 0
        for r in range(n_new):
            slots[r] = new_slots[r]
        # keep the unused rows listed after the live ones
        for s in range(fi, n_free):
            slots[n_new + used] = free[s]
            used += 1
        active = n_new
        for r in range(active):
            p = slots[r]
            _push_bit(beta, scratch, p, j, u[p, j], n, big_n)
    best = slots[0]
    for r in range(1, active):
        p = slots[r]
        if pm[p] < pm[best]:
            best = p
    return u[best].copy(), pm[best]


@dataclass
class StageResult:
    v_hat: np.ndarray
    l_hat: np.ndarray
    s_hat: np.ndarray
    metric: float = 0.0
    impossible: int = 0
    diagnostics: dict = field(default_factory=dict)


def _taps(poly: ConvPoly) -> np.ndarray:
    return np.array([m for m, c in enumerate(poly.coeffs) if c and m > 0], dtype=np.int64)


def _frozen_vector(f, code: LevelCode) -> np.ndarray:
    f = np.asarray(f, dtype=np.uint8).ravel()
    frozen = code.frozen_set
    if f.shape[0] != len(frozen):
        raise ShapeError(f"{f.shape[0]} frozen values for {len(frozen)} frozen positions")
    out = np.zeros(code.block_len, dtype=np.uint8)
    out[list(frozen)] = f
    return out


def path_metric(l_bits, llr0) -> float:
    """Sum of log(1 + exp(-(1-2l) llr)) over a source word."""
    x = np.where(np.asarray(l_bits) == 0, llr0, -np.asarray(llr0))
    return float(np.logaddexp(0.0, -x).sum())


def scl_decode_stage(llr0, f, code: LevelCode, poly: ConvPoly, list_size: int) -> StageResult:
    llr0 = np.asarray(llr0, dtype=float)
    big_n = code.block_len
    if llr0.shape != (big_n,):
        raise ShapeError(f"expected {big_n} LLRs, got shape {llr0.shape}")
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    n = n_stages_of(big_n)
    frozen_val = _frozen_vector(f, code)
    mask = code.key_mask()
    if not mask.any():
        v = frozen_val
        u = deconvolve(v, poly)
        metric = path_metric(inverse_polar(u), llr0)
    else:
        chan = np.ascontiguousarray(llr0[bit_reversal_perm(n)])
        u, metric = _scl_kernel(chan, mask, frozen_val, _taps(poly), int(list_size))
        v = convolve(u, poly)
    l_hat = inverse_polar(u)
    return StageResult(v, l_hat, v[mask], float(metric))


def sc_decode_stage(llr0, f, code: LevelCode, poly: ConvPoly) -> StageResult:
    """Plain recursive SC decoding (reference for list size one)."""
    llr0 = np.asarray(llr0, dtype=float)
    big_n = code.block_len
    n = n_stages_of(big_n)
    frozen_val = _frozen_vector(f, code)
    mask = code.key_mask()
    taps = _taps(poly)
    u = np.zeros(big_n, dtype=np.uint8)
    metric = 0.0

    def rec(lam, start):
        nonlocal metric
        if lam.shape[0] == 1:
            j = start
            if mask[j]:
                # decide on the path-metric penalty so metric ties go to 0, as in the list decoder
                b = 1 if _penalty(1, lam[0]) < _penalty(0, lam[0]) else 0
            else:
                b = int(frozen_val[j])
                for m in taps:
                    if m <= j:
                        b ^= int(u[j - m])
            u[j] = b
            metric += _penalty(b, lam[0])
            return np.array([b], dtype=np.uint8)
        half = lam.shape[0] // 2
        a, b = lam[:half], lam[half:]
        left = rec(_f_array(a, b), start)
        right = rec(b + np.where(left == 0, a, -a), start + half)
        return np.concatenate((left ^ right, right))

    rec(llr0[bit_reversal_perm(n)], 0)
    v = convolve(u, poly)
    return StageResult(v, inverse_polar(u), v[mask], metric)


def multistage_decode(y, f_all, codes, poly: ConvPoly, spec: QuantizerSpec, pp: PosteriorParams,
                      list_size: int, *, chained: bool = True):
    """Decode all levels in order 1..Q; returns ``(key_bits, stage_results)``.

    With ``chained=False`` every level is decoded from y alone (no prefix).
    """
    y = np.asarray(y, dtype=float)
    q_levels = spec.q_levels
    if len(codes) != q_levels or len(f_all) != q_levels:
        raise ShapeError("need one code and one frozen-value vector per level")
    post = posterior_matrix(y, spec, pp)
    l_hat = np.zeros((y.shape[0], q_levels), dtype=np.uint8)
    stages = []
    for q in range(1, q_levels + 1):
        code = codes[q - 1]
        prefix = l_hat[:, : q - 1] if chained else None
        llr, imp = level_llrs(y, q, prefix, spec, pp, post=post)
        if code.n_key == code.block_len:
            # rate-one level: ML is the hard decision on each label bit
            lq = (llr < 0).astype(np.uint8)
            u = polar_transform(lq)
            v = convolve(u, poly)
            res = StageResult(v, lq, v, path_metric(lq, llr))
        else:
            res = scl_decode_stage(llr, f_all[q - 1], code, poly, list_size)
        res.impossible = imp
        stages.append(res)
        l_hat[:, q - 1] = res.l_hat
    keys = np.concatenate([r.s_hat for r in stages]) if stages else np.zeros(0, dtype=np.uint8)
    return keys.astype(np.uint8), stages
