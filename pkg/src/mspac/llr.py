"""Source-side LLRs for multistage decoding from Bob's observations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .source import QuantizerSpec, SourceParams, interval_index

LLR_MAX = 40.0
IMPOSSIBLE_MASS = 1e-300


@dataclass(frozen=True)
class PosteriorParams:
    """X | Y=y is Gaussian with mean ``mu_given_y * y`` and std ``sigma_given_y``."""

    mu_given_y: float
    sigma_given_y: float

    @classmethod
    def from_source(cls, params: SourceParams) -> "PosteriorParams":
        sz2, sw2 = params.sigma_z2, params.sigma_w2
        return cls(sz2 / (sz2 + sw2), float(np.sqrt((2 * sz2 * sw2 + sw2 ** 2) / (sz2 + sw2))))

    @classmethod
    def noiseless(cls) -> "PosteriorParams":
        return cls(1.0, 0.0)


def gaussian_mass(a, b) -> np.ndarray:
    """Phi(b) - Phi(a) for a <= b, evaluated on the tail that avoids cancellation."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = ndtr(-a) - ndtr(-b)
    lower = ndtr(b) - ndtr(a)
    return np.where(a > 0, upper, lower)


def posterior_matrix(y, spec: QuantizerSpec, pp: PosteriorParams) -> np.ndarray:
    """Pr(X in R_t | y) for every sample (rows) and interval (columns)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if pp.sigma_given_y == 0.0:
        # noiseless side information: all mass on the interval holding mu
        idx = interval_index(pp.mu_given_y * y, spec)
        out = np.zeros((y.shape[0], spec.n_intervals))
        out[np.arange(y.shape[0]), idx - 1] = 1.0
        return out
    mu = pp.mu_given_y * y[:, None]
    edges = (spec.boundaries[None, :] - mu) / pp.sigma_given_y
    # one cdf/sf evaluation per edge; differences taken on the tail away from cancellation
    cdf, sf = ndtr(edges), ndtr(-edges)
    return np.where(edges[:, :-1] > 0, sf[:, :-1] - sf[:, 1:], cdf[:, 1:] - cdf[:, :-1])


def interval_posterior(y: float, t: int, spec: QuantizerSpec, pp: PosteriorParams) -> float:
    return float(posterior_matrix([y], spec, pp)[0, t - 1])


def level_llrs(y, level: int, prefix, spec: QuantizerSpec, pp: PosteriorParams, post=None):
    """Initial LLRs of label bit ``level`` (1-based) for every sample.

    ``prefix`` holds the decided bits of levels 1..level-1, shape
    ``(len(y), level-1)``; ``None`` marginalises over them instead.  Returns
    ``(llr, n_impossible)`` where impossible samples (label set carrying no
    posterior mass) get LLR 0.
    """
    if post is None:
        post = posterior_matrix(y, spec, pp)
    n = post.shape[0]
    # SP labels: interval t-1 = (high bits, bit of this level, lower-level prefix)
    grouped = post.reshape(n, 1 << (spec.q_levels - level), 2, 1 << (level - 1))
    if prefix is None or level == 1:
        p = grouped.sum(axis=(1, 3))
    else:
        prefix = np.asarray(prefix, dtype=np.int64).reshape(n, level - 1)
        pre_code = (prefix << np.arange(level - 1)).sum(axis=1)
        p = grouped[np.arange(n), :, :, pre_code].sum(axis=1)
    p0, p1 = p[:, 0], p[:, 1]
    impossible = (p0 + p1) < IMPOSSIBLE_MASS
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.log(p0) - np.log(p1)
    llr = np.where(impossible, 0.0, llr)
    llr = np.clip(np.nan_to_num(llr, nan=0.0, posinf=LLR_MAX, neginf=-LLR_MAX), -LLR_MAX, LLR_MAX)
    return llr, int(impossible.sum())


def initial_llr(y: float, level: int, prefix, spec: QuantizerSpec, pp: PosteriorParams) -> float:
    pre = None if level == 1 else np.asarray(prefix, dtype=np.uint8).reshape(1, level - 1)
    llr, _ = level_llrs([y], level, pre, spec, pp)
    return float(llr[0])
