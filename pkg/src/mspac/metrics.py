"""Key-generation figures of merit and the finite-length upper bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import ndtri
from scipy.stats import binomtest

from .gf2 import ShapeError
from .source import SourceParams

LOG2E = math.log2(math.e)


class DomainError(ValueError):
    pass


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class SimResult:
    """Aggregated Monte Carlo outcome of one (scheme, N, SNR) cell.

    KDR is a per-block proportion; BDR pools every key bit of every block,
    so its interval treats bit errors as independent (optimistic when errors
    cluster inside failed blocks).
    """

    rate_key: float
    trials: int
    key_len: int
    block_errors: int
    bit_errors: int
    impossible: int = 0

    def __post_init__(self):
        if self.trials < 0 or not 0 <= self.block_errors <= self.trials:
            raise ValueError("block error count outside [0, trials]")
        if not 0 <= self.bit_errors <= self.trials * self.key_len:
            raise ValueError("bit error count outside [0, trials * K]")

    @property
    def kdr(self) -> float:
        return self.block_errors / self.trials if self.trials else 0.0

    @property
    def bdr(self) -> float:
        total = self.trials * self.key_len
        return self.bit_errors / total if total else 0.0

    @property
    def kdr_ci(self) -> tuple[float, float]:
        return wilson_interval(self.block_errors, self.trials)

    @property
    def bdr_ci(self) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.trials * self.key_len)

    @property
    def ci_half_width(self) -> dict[str, float]:
        lo, hi = self.kdr_ci
        blo, bhi = self.bdr_ci
        return {"kdr": (hi - lo) / 2.0, "bdr": (bhi - blo) / 2.0}

    def merge(self, other: "SimResult") -> "SimResult":
        if (self.rate_key, self.key_len) != (other.rate_key, other.key_len):
            raise ValueError("cannot merge results of different codes")
        return SimResult(self.rate_key, self.trials + other.trials, self.key_len,
                         self.block_errors + other.block_errors, self.bit_errors + other.bit_errors,
                         self.impossible + other.impossible)


def key_capacity(params: SourceParams) -> float:
    """I(h_A; h_B) in bits per complex observation."""
    sh2, sn2 = params.sigma_h2, params.sigma_n2
    if sn2 == 0:
        return math.inf
    return math.log2(1.0 + sh2 * sh2 / (2 * sh2 * sn2 + sn2 * sn2))


def dispersion(params: SourceParams) -> float:
    sh2, sn2 = params.sigma_h2, params.sigma_n2
    return (sh2 * sh2 / (sh2 + sn2) ** 2) * LOG2E ** 2


@dataclass(frozen=True)
class BoundParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.delta >= 0 and self.epsilon + self.delta < 1):
            raise DomainError(f"need eps > 0, delta >= 0, eps + delta < 1 (got {self.epsilon}, {self.delta})")

    @property
    def tau_max(self) -> float:
        return 1.0 - self.epsilon - self.delta


def bound_at(n_complex: int, bp: BoundParams, params: SourceParams, tau: float) -> float:
    """Right-hand side of the finite-length converse at a given tau."""
    if not 0.0 < tau < bp.tau_max:
        raise DomainError(f"tau must lie in (0, {bp.tau_max})")
    n = float(n_complex)
    q_arg = -ndtri(1.0 - bp.epsilon - bp.delta - tau)
    log_term = math.log2((tau + bp.delta) / tau) if bp.delta > 0 else 0.0
    return (key_capacity(params) + 2.0 * math.sqrt(dispersion(params) / n) * q_arg
            + 2.0 / n * (log_term + 0.5 * math.log2(n)))


def finite_bound(n_complex: int, epsilon: float, params: SourceParams, *, optimize_tau: bool = True,
                 delta: float = 0.0, tau: float | None = None) -> float:
    """Finite-length upper bound on R_K, tightened over tau.

    The bound holds for every admissible tau, so the tightest statement is the
    infimum.  With delta = 0 the expression increases in tau and the infimum is
    the tau -> 0 limit, C_K - 2 sqrt(V/N) Q^{-1}(eps) + log2(N) / N.
    """
    if n_complex < 1:
        raise DomainError("N must be positive")
    bp = BoundParams(epsilon, delta)
    if not optimize_tau:
        if tau is None:
            raise DomainError("tau is required when optimize_tau is off")
        return bound_at(n_complex, bp, params, tau)
    if delta == 0.0:
        n = float(n_complex)
        return (key_capacity(params) - 2.0 * math.sqrt(dispersion(params) / n) * float(-ndtri(epsilon))
                + math.log2(n) / n)
    res = optimize.minimize_scalar(lambda t: bound_at(n_complex, bp, params, t),
                                   bounds=(1e-12, bp.tau_max - 1e-12), method="bounded",
                                   options={"xatol": 1e-6})
    return float(res.fun)


def measure_disagreement(s, s_hat) -> tuple[int, float]:
    s = np.asarray(s, dtype=np.uint8).ravel()
    s_hat = np.asarray(s_hat, dtype=np.uint8).ravel()
    if s.shape != s_hat.shape:
        raise ShapeError(f"key lengths differ: {s.size} vs {s_hat.size}")
    if s.size == 0:
        return 0, 0.0
    errs = int(np.count_nonzero(s != s_hat))
    return int(errs > 0), errs / s.size


@dataclass(frozen=True)
class UniformityReport:
    n_keys: int
    max_bias: float
    max_correlation: float
    bias_flag: bool
    correlation_flag: bool


def key_uniformity_diag(keys, n_sigma: float = 5.0) -> UniformityReport:
    """Per-bit bias and pairwise correlation of a key sample, flagged at ``n_sigma``."""
    keys = np.asarray(keys, dtype=float)
    if keys.ndim != 2:
        raise ShapeError("keys must be a 2-D array (samples x bits)")
    m, k = keys.shape
    if m < 1000:
        raise DomainError(f"need at least 1000 keys, got {m}")
    p = keys.mean(axis=0)
    max_bias = float(np.abs(p - 0.5).max()) if k else 0.0
    max_corr = 0.0
    if k > 1:
        centered = keys - p
        std = centered.std(axis=0)
        ok = std > 0
        if ok.sum() > 1:
            z = centered[:, ok] / std[ok]
            corr = (z.T @ z) / m
            np.fill_diagonal(corr, 0.0)
            max_corr = float(np.abs(corr).max())
    return UniformityReport(m, max_bias, max_corr,
                            max_bias > n_sigma * 0.5 / math.sqrt(m),
                            max_corr > n_sigma / math.sqrt(m))
