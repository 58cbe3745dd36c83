import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from mspac.source import (ParameterError, SourceParams, build_quantizer, interval_index,
                          noiseless_observations, quantize_and_label, sample_observations, sp_label)


def test_params_validation():
    with pytest.raises(ParameterError):
        SourceParams(0.0, 1.0)
    with pytest.raises(ParameterError):
        SourceParams(1.0, -1.0)
    p = SourceParams.from_snr_db(20.0)
    assert p.sigma_n2 == pytest.approx(0.01)
    assert p.marginal_variance == pytest.approx(0.505)


def test_sampling_is_deterministic():
    p = SourceParams(1.0, 0.1)
    a, b = sample_observations(p, 64, 5), sample_observations(p, 64, 5)
    assert (a.alice == b.alice).all() and (a.bob == b.bob).all()
    assert a.alice.shape == (128,) and a.n_complex == 64


def test_noiseless_sides_agree():
    blk = noiseless_observations(1.0, 32, 1)
    assert (blk.alice == blk.bob).all()


def test_correlation_and_variance():
    p = SourceParams(1.0, 0.01)
    blk = sample_observations(p, 500_000, 11)
    r = np.corrcoef(blk.alice, blk.bob)[0, 1]
    assert abs(r - 1.0 / 1.01) < 0.002
    n = blk.alice.size
    var = p.marginal_variance
    # sample variance has std var * sqrt(2/n)
    assert abs(blk.alice.var() - var) < 5 * var * math.sqrt(2.0 / n)


def test_quantizer_examples():
    q1 = build_quantizer(1, 3.0)
    assert q1.boundaries[1:-1].tolist() == [0.0]
    q2 = build_quantizer(2, 1.0)
    assert q2.boundaries[1:-1] == pytest.approx([norm.ppf(0.25), 0.0, norm.ppf(0.75)], abs=1e-12)
    assert q2.boundaries[1] == pytest.approx(-0.67449, abs=1e-5)


@pytest.mark.parametrize("q", [1, 2, 4, 8, 12])
@pytest.mark.parametrize("var", [0.3, 1.0, 2.5])
def test_intervals_are_equiprobable(q, var):
    spec = build_quantizer(q, var)
    b = spec.boundaries
    assert (np.diff(b) > 0).all()
    mass = np.diff(norm.cdf(b / math.sqrt(var)))
    assert np.abs(mass - 2.0 ** -q).max() < 1e-9


def test_empirical_equiprobability():
    q, var = 6, 0.505
    spec = build_quantizer(q, var)
    x = np.random.default_rng(2).normal(0, math.sqrt(var), 1_000_000)
    counts = np.bincount(interval_index(x, spec) - 1, minlength=1 << q)
    p = 2.0 ** -q
    se = math.sqrt(x.size * p * (1 - p))
    assert np.abs(counts - x.size * p).max() < 5 * se


def test_sp_label_examples():
    assert sp_label(1, 3).tolist() == [0, 0, 0]
    assert sp_label(6, 3).tolist() == [1, 0, 1]
    with pytest.raises(ParameterError):
        sp_label(9, 3)


@pytest.mark.parametrize("q", [1, 3, 5])
def test_sp_label_bijective_and_alternating(q):
    labels = np.array([sp_label(t, q) for t in range(1, (1 << q) + 1)])
    assert len({tuple(r) for r in labels}) == 1 << q
    assert (labels[1:, 0] != labels[:-1, 0]).all()
    assert (build_quantizer(q, 1.0).labels == labels).all()


def test_quantize_boundary_and_examples():
    spec = build_quantizer(3, 1.0)
    r = spec.boundaries
    assert interval_index(r[4], spec) == 5
    assert interval_index(np.nextafter(r[4], -np.inf), spec) == 4
    # x = 0.1 sits between r_4 = 0 and r_5 = Phi^{-1}(5/8) = 0.3186
    assert norm.ppf(5 / 8) > 0.1
    assert interval_index(0.1, spec) == 5
    assert quantize_and_label([0.1], spec)[0].tolist() == sp_label(5, 3).tolist()
    with pytest.raises(ParameterError):
        interval_index([np.nan], spec)


@given(st.floats(-5, 5, allow_nan=False))
def test_q1_label_is_sign(x):
    spec = build_quantizer(1, 1.0)
    assert quantize_and_label([x], spec)[0, 0] == int(x >= 0)
