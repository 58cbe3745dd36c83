"""Correlated Gaussian observations, equiprobable quantization and SP labels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SourceParams:
    """Complex variances of the common component and of each additive noise."""

    sigma_h2: float
    sigma_n2: float

    def __post_init__(self):
        if not (self.sigma_h2 > 0 and self.sigma_n2 > 0):
            raise ParameterError(f"variances must be positive, got {self.sigma_h2}, {self.sigma_n2}")

    @classmethod
    def from_snr_db(cls, snr_db: float, sigma_h2: float = 1.0) -> "SourceParams":
        return cls(sigma_h2, sigma_h2 / 10.0 ** (snr_db / 10.0))

    # per-real-component variances
    @property
    def sigma_z2(self) -> float:
        return self.sigma_h2 / 2.0

    @property
    def sigma_w2(self) -> float:
        return self.sigma_n2 / 2.0

    @property
    def marginal_variance(self) -> float:
        return (self.sigma_h2 + self.sigma_n2) / 2.0


@dataclass(frozen=True)
class ObservationBlock:
    alice: np.ndarray
    bob: np.ndarray

    @property
    def n_complex(self) -> int:
        return self.alice.shape[-1] // 2


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_observations(params: SourceParams, n_complex: int, seed) -> ObservationBlock:
    """Draw ``2N`` real samples per side: alice = z + w_a, bob = z + w_b."""
    if n_complex < 1:
        raise ParameterError("n_complex must be >= 1")
    rng = _rng(seed)
    size = 2 * n_complex
    z = rng.normal(0.0, np.sqrt(params.sigma_z2), size)
    wa = rng.normal(0.0, np.sqrt(params.sigma_w2), size)
    wb = rng.normal(0.0, np.sqrt(params.sigma_w2), size)
    return ObservationBlock(z + wa, z + wb)


def noiseless_observations(sigma_h2: float, n_complex: int, seed) -> ObservationBlock:
    """Degenerate sigma_n^2 = 0 source: both sides see the same samples."""
    rng = _rng(seed)
    z = rng.normal(0.0, np.sqrt(sigma_h2 / 2.0), 2 * n_complex)
    return ObservationBlock(z, z.copy())


def sp_label(t: int, q_levels: int) -> np.ndarray:
    """Label of interval ``t`` (1-based): bit q-1 of t-1, level 1 first."""
    if not 1 <= t <= 1 << q_levels:
        raise ParameterError(f"interval {t} outside [1, {1 << q_levels}]")
    return ((t - 1) >> np.arange(q_levels)) & 1


@dataclass(frozen=True)
class QuantizerSpec:
    q_levels: int
    boundaries: np.ndarray  # r_0 = -inf < r_1 < ... < r_{2^Q} = +inf
    labels: np.ndarray = field(repr=False)  # (2^Q, Q); row t-1 is the label of interval t
    scale: float = 1.0

    @property
    def n_intervals(self) -> int:
        return 1 << self.q_levels


def build_quantizer(q_levels: int, marginal_variance: float) -> QuantizerSpec:
    if not 1 <= q_levels <= 16:
        raise ParameterError("q_levels must lie in [1, 16]")
    if not marginal_variance > 0:
        raise ParameterError("marginal_variance must be positive")
    m = 1 << q_levels
    scale = float(np.sqrt(marginal_variance))
    inner = scale * ndtri(np.arange(1, m) / m)
    bounds = np.concatenate(([-np.inf], inner, [np.inf]))
    labels = ((np.arange(m)[:, None] >> np.arange(q_levels)[None, :]) & 1).astype(np.uint8)
    bounds.setflags(write=False)
    labels.setflags(write=False)
    return QuantizerSpec(q_levels, bounds, labels, scale)


def interval_index(x, spec: QuantizerSpec) -> np.ndarray:
    """1-based interval of each sample; x == r_t falls in interval t+1."""
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any():
        raise ParameterError("NaN in quantizer input")
    return np.searchsorted(spec.boundaries[1:-1], x, side="right") + 1


def quantize_and_label(x, spec: QuantizerSpec) -> np.ndarray:
    """Map samples to their Q-bit labels, shape ``(len(x), Q)``."""
    return spec.labels[interval_index(x, spec) - 1]
