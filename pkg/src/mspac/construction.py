"""Code construction: GA density evolution, minimum-weight enumeration of PAC
cosets, required-SNR evaluation and the greedy rate profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline
from numba import njit
from scipy.special import ndtr, ndtri

from .gf2 import inverse_polar, pack_bits, packed_weight
from .pac import DEFAULT_CONV, ConvPoly, LevelCode, deconvolve


class DomainError(ValueError):
    pass


class EnumerationBudgetError(RuntimeError):
    pass


MAX_CONSTRAINED = 24
BRUTE_FORCE_MAX_KEYS = 20


def q_inv(p: float) -> float:
    """Inverse Gaussian tail function Q^{-1}(p)."""
    return float(-ndtri(p))


def q_func(x):
    return ndtr(-np.asarray(x, dtype=float))


# -- J function -------------------------------------------------------------

def _mi_complement(sigma: float) -> float:
    """1 - J(sigma) = E[log2(1 + e^{-x})], x ~ N(sigma^2/2, sigma^2)."""
    if sigma == 0.0:
        return 1.0
    mean = sigma * sigma / 2.0

    def integrand(z):
        return math.exp(-0.5 * z * z) * np.logaddexp(0.0, -(mean + sigma * z))

    # the mass sits near z = 0 and, for large sigma, near x = 0 (z = -sigma/2)
    lo, hi = min(-40.0, -sigma / 2 - 40.0), 40.0
    val, _ = integrate.quad(integrand, lo, hi, points=sorted({-sigma / 2, 0.0}), limit=400,
                            epsabs=0.0, epsrel=1e-12)
    return val / math.sqrt(2 * math.pi) / math.log(2.0)


def j_function(sigma_llr: float) -> float:
    """Mutual information between a bit and its consistent Gaussian LLR of std ``sigma_llr``."""
    if sigma_llr < 0:
        raise DomainError("sigma must be non-negative")
    return 1.0 - _mi_complement(float(sigma_llr))


def j_inverse(i: float, xtol: float = 1e-12) -> float:
    if not 0.0 <= i < 1.0:
        raise DomainError(f"mutual information must lie in [0, 1), got {i}")
    if i == 0.0:
        return 0.0
    hi = 1.0
    while j_function(hi) < i:
        hi *= 2.0
    return optimize.brentq(lambda s: j_function(s) - i, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


@lru_cache(maxsize=1)
def _j_table():
    # s(sigma) = sqrt(-ln(1 - J(sigma))) is smooth and near-linear at both ends
    sig = np.linspace(0.0, 60.0, 3001)
    s = np.sqrt(np.maximum(-np.log([_mi_complement(x) for x in sig]), 0.0))
    return CubicSpline(sig, s), CubicSpline(s, sig), sig, s


def _log_complement(sigma: np.ndarray) -> np.ndarray:
    """ln(1 - J(sigma)), vectorised and free of underflow."""
    fwd, _, sig, s = _j_table()
    sigma = np.asarray(sigma, dtype=float)
    slope = (s[-1] - s[-2]) / (sig[-1] - sig[-2])
    out = np.where(sigma <= sig[-1], fwd(np.minimum(sigma, sig[-1])), s[-1] + slope * (sigma - sig[-1]))
    return -np.maximum(out, 0.0) ** 2


def _sigma_from_log_complement(logc: np.ndarray) -> np.ndarray:
    _, inv, sig, s = _j_table()
    target = np.sqrt(np.maximum(-np.asarray(logc, dtype=float), 0.0))
    slope = (sig[-1] - sig[-2]) / (s[-1] - s[-2])
    return np.where(target <= s[-1], inv(np.minimum(target, s[-1])), sig[-1] + slope * (target - s[-1]))


@dataclass(frozen=True)
class GAState:
    log_complement: np.ndarray  # ln(1 - I) per bit channel, u order
    sigma: np.ndarray  # std of the Gaussian LLR per bit channel

    @property
    def mutual_info(self) -> np.ndarray:
        return -np.expm1(self.log_complement)

    def bler_terms(self) -> np.ndarray:
        """Q(sqrt(E[llr]/2)) per bit channel, with E[llr] = sigma^2/2."""
        return q_func(self.sigma / 2.0)

    def ranking(self) -> np.ndarray:
        """Indices from most to least reliable; ties go to the lower index."""
        return np.lexsort((np.arange(self.sigma.size), self.log_complement))


def initial_sigma(snr: float, literal: bool = False) -> float:
    # LLR = 2y/sigma^2 for y = +-1 + N(0, sigma^2) has std 2 sqrt(rho)
    return 2.0 * snr if literal else 2.0 * math.sqrt(snr)


def ga_evolve(snr: float, n_stages: int, *, literal_init: bool = False) -> GAState:
    """Mutual-information density evolution over ``n_stages`` butterfly layers."""
    if not snr > 0:
        raise DomainError("snr must be positive")
    sigma = np.array([initial_sigma(snr, literal_init)])
    logc = _log_complement(sigma)
    for _ in range(n_stages):
        sig_odd = math.sqrt(2.0) * sigma
        logc_odd = _log_complement(sig_odd)
        # I_even = 2 I - I_odd  <=>  (1 - I_even) = 2 (1 - I) - (1 - I_odd)
        logc_even = np.minimum(logc + np.log(2.0 - np.exp(logc_odd - logc)), 0.0)
        sig_even = _sigma_from_log_complement(logc_even)
        logc = np.stack((logc_even, logc_odd), axis=1).ravel()
        sigma = np.stack((sig_even, sig_odd), axis=1).ravel()
    return GAState(logc, sigma)


# -- minimum-weight codewords -----------------------------------------------

@dataclass
class WeightReport:
    w_min: int
    w_min_count: int
    per_coset: dict[int, int] = field(default_factory=dict)
    constrained: dict[int, int] = field(default_factory=dict)  # leader -> |K_hat|
    discounted: dict[int, int] = field(default_factory=dict)  # leader -> W_hat


def min_weight(key_set, n_stages: int) -> int:
    keys = list(key_set)
    if not keys:
        raise DomainError("key set is empty")
    return min(1 << bin(int(i)).count("1") for i in keys)


class _Coset:
    """Min-weight words of the full polar coset led by row ``i``.

    With y = x + 1 and P the zero bits of ``i``, a word of weight 2^|S_i| with
    leading row ``i`` is exactly prod_{b in P} (y_b + p_b(y)) where p_b is any
    polynomial in the variables {y_c : c in S_i, c < b}.  The coefficient of
    y^T in p_b is the bit of row i + 2^b - sum_{t in T} 2^t, i.e. of the rows
    j > i with |S_j minus S_i| = 1; every other row's bit is a polynomial in
    parameters of lower rows.
    """

    def __init__(self, i: int, n_stages: int):
        self.i = i
        self.mask = i
        self.params: dict[int, tuple[int, int]] = {}
        for b in range(n_stages):
            if (i >> b) & 1:
                continue
            low = i & ((1 << b) - 1)
            t = low
            while True:
                self.params[i + (1 << b) - t] = (b, t)
                if t == 0:
                    break
                t = (t - 1) & low


@njit(cache=True)
def _coefficient(j, i, coef):
    # [y^removed] prod_{b in added} p_b = parity over alpha subset of removed of prod_b p_b(alpha)
    added = j & ~i
    removed = i & ~j
    acc = 0
    alpha = removed
    while True:
        prod = 1
        b = 0
        rest = added
        while rest:
            if rest & 1:
                sub = alpha & ((1 << b) - 1)
                ev = 0
                t = sub
                while True:
                    ev ^= coef[b, t]
                    if t == 0:
                        break
                    t = (t - 1) & sub
                if ev == 0:
                    prod = 0
                    break
            rest >>= 1
            b += 1
        acc ^= prod
        if alpha == 0:
            break
        alpha = (alpha - 1) & removed
    return acc


@njit(cache=True)
def _coset_dfs(i, b_max, n_stages, key_mask, param_b, param_t, taps):
    """Count parameter assignments of the coset led by ``i`` that meet every
    frozen constraint up to row ``b_max``; branches only at key parameters."""
    big_n = key_mask.size
    u = np.zeros(big_n, dtype=np.uint8)
    u[i] = 1
    coef = np.zeros((n_stages, big_n), dtype=np.uint8)
    branch_pos = np.zeros(big_n, dtype=np.int64)
    branch_bit = np.zeros(big_n, dtype=np.uint8)
    depth = 0
    consistent = 0
    j = i + 1
    while True:
        ok = True
        while j <= b_max:
            conv = 0
            for m in taps:
                if m <= j:
                    conv ^= u[j - m]
            if param_b[j] >= 0:
                if key_mask[j]:
                    branch_pos[depth] = j
                    branch_bit[depth] = 0
                    depth += 1
                    bit = 0
                else:
                    bit = conv
                u[j] = bit
                coef[param_b[j], param_t[j]] = bit
            else:
                bit = _coefficient(j, i, coef)
                u[j] = bit
                if not key_mask[j] and bit != conv:
                    ok = False
                    break
            j += 1
        if ok:
            consistent += 1
        while depth > 0 and branch_bit[depth - 1] == 1:
            depth -= 1
        if depth == 0:
            break
        p = branch_pos[depth - 1]
        branch_bit[depth - 1] = 1
        # parameters above the branch point are unassigned again
        for r in range(p + 1, b_max + 1):
            if param_b[r] >= 0:
                coef[param_b[r], param_t[r]] = 0
        u[p] = 1
        coef[param_b[p], param_t[p]] = 1
        j = p + 1
    return consistent


def _coset_count(i: int, key_mask: np.ndarray, taps: list[int], n_stages: int):
    """Number of PAC codewords of weight 2^|S_i| led by row ``i``: (W_i, |K_hat|, W_hat)."""
    big_n = 1 << n_stages
    coset = _Coset(i, n_stages)
    k_set = sorted(j for j in coset.params if key_mask[j])
    b_set = [b for b in range(i + 1, big_n) if not key_mask[b] and bin(b & ~i).count("1") > 1]
    b_max = max(b_set) if b_set else -1
    k_hat = [j for j in k_set if j < b_max]
    if len(k_hat) > MAX_CONSTRAINED:
        raise EnumerationBudgetError(f"|K_hat| = {len(k_hat)} for leader {i} exceeds {MAX_CONSTRAINED}")
    free_factor = 1 << (len(k_set) - len(k_hat))
    if b_max < 0:
        return free_factor, 0, 0

    param_b = np.full(big_n, -1, dtype=np.int64)
    param_t = np.zeros(big_n, dtype=np.int64)
    for j, (b, t) in coset.params.items():
        param_b[j], param_t[j] = b, t
    consistent = _coset_dfs(i, b_max, n_stages, key_mask.astype(np.uint8), param_b, param_t,
                            np.array(taps, dtype=np.int64))
    n_hat = 1 << len(k_hat)
    return free_factor * consistent, len(k_hat), n_hat - consistent


def _taps(poly: ConvPoly) -> list[int]:
    return [m for m, c in enumerate(poly.coeffs) if c and m > 0]


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def _gray_scan(rows):
    # walk the span in Gray-code order: one row XOR per codeword
    k, n_words = rows.shape
    cur = np.zeros(n_words, dtype=np.uint64)
    best = 1 << 62
    per = np.zeros(k, dtype=np.int64)
    for g in range(1, 1 << k):
        flip = 0
        while not (g >> flip) & 1:
            flip += 1
        w = 0
        for t in range(n_words):
            cur[t] ^= rows[flip, t]
            w += _popcount64(cur[t])
        if w <= best:
            if w < best:
                best = w
                per[:] = 0
            code = g ^ (g >> 1)
            low = 0
            while not (code >> low) & 1:
                low += 1
            per[low] += 1
    return best, per


def exhaustive_min_weight(key_set, poly: ConvPoly, n_stages: int, *, max_keys: int = 32) -> WeightReport:
    """Minimum weight by a Gray-code walk over the whole key space (numba)."""
    keys = sorted({int(k) for k in key_set})
    if not keys:
        raise DomainError("key set is empty")
    if len(keys) > max_keys:
        raise EnumerationBudgetError(f"{len(keys)} key bits exceed the exhaustive budget of {max_keys}")
    rows = pack_bits(generator_rows(keys, poly, n_stages))
    w, per = _gray_scan(np.ascontiguousarray(rows))
    per_coset = {keys[i]: int(c) for i, c in enumerate(per) if c}
    return WeightReport(int(w), int(per.sum()), per_coset)


def count_min_weight(key_set, poly: ConvPoly, n_stages: int, *,
                     fallback_max_keys: int = 32) -> WeightReport:
    """Minimum weight and its multiplicity for the PAC code with key set ``key_set``.

    Each minimum-row-weight leader contributes 2^{|K \\ K_hat|}(2^{|K_hat|} - W_hat);
    the constrained subsets of K_hat are checked by materialising the
    codeword and testing the dynamic frozen constraints.  If no leader of the
    minimum row weight yields a codeword, the true minimum weight is larger
    and small instances fall back to exhaustive search.
    """
    keys = sorted({int(k) for k in key_set})
    if not keys:
        raise DomainError("key set is empty")
    big_n = 1 << n_stages
    key_mask = np.zeros(big_n, dtype=bool)
    key_mask[keys] = True
    w_row = min_weight(keys, n_stages)
    taps = _taps(poly)
    report = WeightReport(w_row, 0)
    for i in keys:
        if (1 << bin(i).count("1")) != w_row:
            continue
        w_i, n_hat, w_hat = _coset_count(i, key_mask, taps, n_stages)
        report.per_coset[i] = w_i
        report.constrained[i] = n_hat
        report.discounted[i] = w_hat
    report.w_min_count = sum(report.per_coset.values())
    if report.w_min_count == 0:
        if len(keys) > fallback_max_keys:
            raise EnumerationBudgetError(
                f"no codeword of row weight {w_row}; exhaustive fallback needs {len(keys)} > {fallback_max_keys} keys")
        return exhaustive_min_weight(keys, poly, n_stages, max_keys=fallback_max_keys)
    return report


def generator_rows(key_set, poly: ConvPoly, n_stages: int) -> np.ndarray:
    """Source words l produced by each unit key vector (frozen v bits zero)."""
    big_n = 1 << n_stages
    keys = sorted(int(k) for k in key_set)
    v = np.zeros((len(keys), big_n), dtype=np.uint8)
    v[np.arange(len(keys)), keys] = 1
    return inverse_polar(deconvolve(v, poly))


def brute_force_weights(key_set, poly: ConvPoly, n_stages: int, *,
                        max_keys: int = BRUTE_FORCE_MAX_KEYS) -> WeightReport:
    """Exhaustive weight enumeration over every key assignment."""
    keys = sorted({int(k) for k in key_set})
    if not keys:
        raise DomainError("key set is empty")
    if len(keys) > max_keys:
        raise EnumerationBudgetError(f"{len(keys)} key bits exceed the exhaustive budget of {max_keys}")
    rows = pack_bits(generator_rows(keys, poly, n_stages))
    words = np.zeros((1, rows.shape[1]), dtype=np.uint64)
    for r in rows:
        words = np.concatenate((words, words ^ r))
    weights = packed_weight(words[1:])
    w = int(weights.min())
    count = int((weights == w).sum())
    # coset of codeword index c is led by its lowest set key bit
    per = {}
    idx = np.nonzero(weights == w)[0] + 1
    lead = np.array(keys)[np.log2(idx & -idx).astype(int)]
    for k in lead:
        per[int(k)] = per.get(int(k), 0) + 1
    return WeightReport(w, count, per)


def required_snr(w_min: int, w_min_count: int, bler_target: float) -> float:
    """SNR at which W_min Q(sqrt(w_min rho)) equals ``bler_target``."""
    arg = bler_target / w_min_count
    if not 0.0 < arg < 1.0:
        raise DomainError(f"Q^-1 argument {arg} outside (0, 1)")
    return q_inv(arg) ** 2 / w_min


def ml_bler(w_min: int, w_min_count: int, snr: float) -> float:
    return float(w_min_count * q_func(math.sqrt(w_min * snr)))


# -- greedy construction ----------------------------------------------------

@dataclass
class RateProfile:
    order: tuple[int, ...]
    bler_target: float
    beta: int
    block_len: int
    poly: ConvPoly = DEFAULT_CONV
    literal_init: bool = False
    prefix_weights: list[tuple[int, int]] | None = None
    snr_trace: list[float] | None = None

    def __post_init__(self):
        if sorted(self.order) != list(range(self.block_len)):
            raise ValueError("profile order is not a permutation of the block")

    @property
    def n_stages(self) -> int:
        return self.block_len.bit_length() - 1

    def key_set(self, k: int) -> tuple[int, ...]:
        return tuple(sorted(self.order[:k]))

    def weights(self) -> list[tuple[int, int]]:
        """(w_min, W_min) of every nonempty prefix, computed on first use."""
        if self.prefix_weights is None:
            out = []
            for k in range(1, self.block_len + 1):
                rep = count_min_weight(self.order[:k], self.poly, self.n_stages)
                out.append((rep.w_min, rep.w_min_count))
            self.prefix_weights = out
        return self.prefix_weights


def construct_profile(bler_target: float, beta: int, n_stages: int, poly: ConvPoly = DEFAULT_CONV,
                      *, literal_init: bool = False, progress=None) -> RateProfile:
    """Greedy ordering of bit channels trading polarization against ML error coefficient."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    big_n = 1 << n_stages
    order = [big_n - 1]
    used = np.zeros(big_n, dtype=bool)
    used[big_n - 1] = True
    snr = q_inv(bler_target) ** 2 / big_n
    weights = [(big_n, 1)]
    trace = [snr]
    for t in range(1, big_n):
        ranking = ga_evolve(snr, n_stages, literal_init=literal_init).ranking()
        cands = [int(z) for z in ranking if not used[z]][: min(beta, big_n - t)]
        best = None
        for z in sorted(cands):
            rep = count_min_weight(order + [z], poly, n_stages)
            rho = required_snr(rep.w_min, rep.w_min_count, bler_target)
            if best is None or rho < best[0]:
                best = (rho, z, rep)
        snr, z, rep = best
        order.append(z)
        used[z] = True
        weights.append((rep.w_min, rep.w_min_count))
        trace.append(snr)
        if progress is not None:
            progress(t, z, snr)
    return RateProfile(tuple(order), bler_target, beta, big_n, poly, literal_init, weights, trace)


# -- rate selection ---------------------------------------------------------

def level_budget(kind: str, epsilon: float, n_levels: int) -> float:
    if kind not in ("KDR", "BDR"):
        raise ValueError(f"unknown reliability metric {kind!r}")
    return epsilon / n_levels


def predicted_bler(profile: RateProfile, k: int, snr: float, ga: GAState | None = None) -> float:
    """min(GA union estimate, ML first-term bound) for the prefix of length k."""
    if k == 0:
        return 0.0
    if math.isinf(snr):
        return 0.0
    ga = ga or ga_evolve(snr, profile.n_stages, literal_init=profile.literal_init)
    ga_est = float(ga.bler_terms()[list(profile.order[:k])].sum())
    w, cnt = profile.weights()[k - 1]
    return min(ga_est, ml_bler(w, cnt, snr))


def select_rates(profile: RateProfile, level_channels, reliability=("KDR", 1e-3)) -> list[LevelCode]:
    """Largest prefix per level whose predicted block error meets epsilon / Q."""
    kind, eps = reliability
    budget = level_budget(kind, eps, len(level_channels))
    big_n = profile.block_len
    codes = []
    for ch in level_channels:
        snr = ch.snr_eq
        if snr == 0.0 or math.isinf(ch.sigma2_eq):
            codes.append(LevelCode(big_n, ()))
            continue
        if math.isinf(snr):
            codes.append(LevelCode(big_n, tuple(range(big_n))))
            continue
        ga = ga_evolve(snr, profile.n_stages, literal_init=profile.literal_init)
        k_best = 0
        for k in range(1, big_n + 1):
            if predicted_bler(profile, k, snr, ga) <= budget:
                k_best = k
        codes.append(LevelCode(big_n, profile.key_set(k_best)))
    return codes


# -- profile files ----------------------------------------------------------

PROFILE_FORMAT = 1


class ProfileFormatError(ValueError):
    pass


def format_profile(profile: RateProfile, tool_version: str) -> str:
    """Versioned text form: header lines, the order, then optional prefix weights."""
    lines = [
        f"mspac-profile {PROFILE_FORMAT}",
        f"tool_version {tool_version}",
        f"block_len {profile.block_len}",
        f"bler_target {profile.bler_target!r}",
        f"beta {profile.beta}",
        f"poly {profile.poly}",
        f"init {'literal' if profile.literal_init else 'sqrt'}",
        "order",
        *(str(i) for i in profile.order),
    ]
    if profile.prefix_weights is not None:
        lines.append("prefix_weights")
        lines.extend(f"{w} {c}" for w, c in profile.prefix_weights)
    return "\n".join(lines) + "\n"


def parse_profile(text: str) -> RateProfile:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != f"mspac-profile {PROFILE_FORMAT}":
        raise ProfileFormatError("not a rate profile (bad magic or format version)")
    header = {}
    pos = 1
    while pos < len(lines) and lines[pos] != "order":
        key, _, val = lines[pos].partition(" ")
        header[key] = val
        pos += 1
    missing = {"block_len", "bler_target", "beta", "poly", "init"} - header.keys()
    if missing or pos == len(lines):
        raise ProfileFormatError(f"profile header incomplete: missing {sorted(missing) or ['order']}")
    try:
        block_len = int(header["block_len"])
        order = [int(x) for x in lines[pos + 1: pos + 1 + block_len]]
        rest = lines[pos + 1 + block_len:]
        weights = None
        if rest:
            if rest[0] != "prefix_weights" or len(rest) != block_len + 1:
                raise ProfileFormatError("malformed prefix_weights section")
            weights = [tuple(int(t) for t in ln.split()) for ln in rest[1:]]
        return RateProfile(tuple(order), float(header["bler_target"]), int(header["beta"]), block_len,
                           ConvPoly(tuple(int(c) for c in header["poly"])), header["init"] == "literal",
                           weights)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ProfileFormatError):
            raise
        raise ProfileFormatError(str(exc)) from exc
