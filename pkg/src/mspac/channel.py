"""Capacity-equivalent BI-AWGN reduction of the per-level virtual channels."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .llr import PosteriorParams, posterior_matrix
from .source import QuantizerSpec

LOG2 = math.log(2.0)


class AccuracyError(RuntimeError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Discretization:
    """Integration grid for Y, in units of the observation's standard deviation."""

    y_min: float = -8.0
    y_max: float = 8.0
    delta_y: float = 1.0 / 200.0

    def __post_init__(self):
        if not (self.y_min < self.y_max and self.delta_y > 0):
            raise ValueError("need y_min < y_max and delta_y > 0")

    def halved(self) -> "Discretization":
        return Discretization(self.y_min, self.y_max, self.delta_y / 2.0)


@dataclass(frozen=True)
class LevelChannel:
    capacity: float
    sigma2_eq: float

    @property
    def snr_eq(self) -> float:
        if self.sigma2_eq == 0.0:
            return math.inf
        return 1.0 / self.sigma2_eq


def _conditional_entropies(level: int, spec: QuantizerSpec, pp: PosteriorParams,
                           disc: Discretization, chained: bool) -> tuple[float, float]:
    sy = spec.scale
    y = sy * np.arange(disc.y_min, disc.y_max + disc.delta_y / 2, disc.delta_y)
    dy = sy * disc.delta_y
    py = np.exp(-0.5 * (y / sy) ** 2) / (sy * math.sqrt(2 * math.pi))
    post = posterior_matrix(y, spec, pp)
    big_q = spec.q_levels

    def h_given(groups: np.ndarray, n_bits: int) -> float:
        # sum_y sum_l -p(y)Pr(l|y) (n_bits + log2(p(y)Pr(l|y))) dy
        joint = py[:, None] * groups
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(joint > 0, joint * (n_bits + np.log2(joint)), 0.0)
        return float(-terms.sum() * dy)

    if chained:
        hi = post.reshape(len(y), 1 << (big_q - level), 1 << level).sum(axis=1)
        lo = post.reshape(len(y), 1 << (big_q - level + 1), 1 << (level - 1)).sum(axis=1)
        return h_given(lo, level - 1), h_given(hi, level)
    bit = post.reshape(len(y), 1 << (big_q - level), 2, 1 << (level - 1)).sum(axis=(1, 3))
    return h_given(np.ones((len(y), 1)), 0), h_given(bit, 1)


def virtual_capacity(level: int, spec: QuantizerSpec, pp: PosteriorParams,
                     disc: Discretization | None = None, *, chained: bool = True,
                     tol: float = 1e-4) -> float:
    """I(L_q; Y | L_{1:q-1}) in bits; ``chained=False`` drops the conditioning."""
    if not 1 <= level <= spec.q_levels:
        raise DomainError(f"level {level} outside [1, {spec.q_levels}]")
    disc = disc or Discretization()
    coarse = np.subtract(*_conditional_entropies(level, spec, pp, disc, chained))
    fine = np.subtract(*_conditional_entropies(level, spec, pp, disc.halved(), chained))
    if abs(fine - coarse) > tol:
        raise AccuracyError(f"grid too coarse: step halving moved capacity by {abs(fine - coarse):.2e} bits")
    return float(min(max(fine, 0.0), 1.0))


def biawgn_capacity(sigma2: float) -> float:
    """Capacity in bits of y = +-1 + noise with variance ``sigma2``."""
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    s = math.sqrt(sigma2)

    def log_py(y):
        a = -((y - 1.0) ** 2) / (2 * sigma2)
        b = -((y + 1.0) ** 2) / (2 * sigma2)
        return -LOG2 - 0.5 * math.log(2 * math.pi * sigma2) + np.logaddexp(a, b)

    # h(Y) = -E[log p_Y(Y)], Y = 1 + s Z by symmetry of the mixture
    def integrand(z):
        return -math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * log_py(1.0 + s * z)

    h_nats, _ = integrate.quad(integrand, -40, 40, points=[-2.0 / s, 0.0], limit=400, epsabs=1e-14, epsrel=1e-13)
    cap = (h_nats - 0.5 * math.log(2 * math.pi * math.e * sigma2)) / LOG2
    return min(max(cap, 0.0), 1.0)


def equivalent_sigma(capacity: float, rtol: float = 1e-9) -> float:
    """Noise variance of the BI-AWGN channel with the given capacity (bisection)."""
    if not 0.0 < capacity < 1.0:
        raise DomainError(f"capacity must lie in (0, 1), got {capacity}")
    lo, hi = math.log(1e-12), math.log(1e12)
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if biawgn_capacity(math.exp(mid)) > capacity:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def level_channel(capacity: float, eps: float = 1e-9) -> LevelChannel:
    if capacity <= eps:
        return LevelChannel(capacity, math.inf)
    if capacity >= 1.0 - eps:
        return LevelChannel(capacity, 0.0)
    return LevelChannel(capacity, equivalent_sigma(capacity))


def level_channels(spec: QuantizerSpec, pp: PosteriorParams, disc: Discretization | None = None,
                   *, chained: bool = True) -> list[LevelChannel]:
    return [level_channel(virtual_capacity(q, spec, pp, disc, chained=chained))
            for q in range(1, spec.q_levels + 1)]
