import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mspac.gf2 import (PolarConfig, ShapeError, bit_reversal_perm, dense_generator, dense_kernel_power,
                       dense_permutation, gf2_matmul, inverse_polar, pack_bits, packed_weight,
                       polar_transform, row_weight)


def bit_vectors(min_stages=1, max_stages=8):
    return st.integers(min_stages, max_stages).flatmap(
        lambda n: st.lists(st.integers(0, 1), min_size=1 << n, max_size=1 << n)).map(
        lambda b: np.array(b, dtype=np.uint8))


def test_permutation_small_cases():
    assert bit_reversal_perm(1).tolist() == [0, 1]
    assert bit_reversal_perm(2).tolist() == [0, 2, 1, 3]


@pytest.mark.parametrize("n", range(1, 9))
def test_permutation_is_involution_and_matches_recursion(n):
    perm = bit_reversal_perm(n)
    assert (perm[perm] == np.arange(1 << n)).all()
    dense = dense_permutation(n)
    # row j holds its single one in column perm[j]
    assert (np.argmax(dense, axis=1) == perm).all()
    assert (dense.sum(axis=1) == 1).all()


def test_transform_examples():
    assert polar_transform([0, 1]).tolist() == [1, 1]
    assert polar_transform([0, 1, 0, 0]).tolist() == [1, 0, 1, 0]
    assert inverse_polar([1, 0, 1, 0]).tolist() == [0, 1, 0, 0]
    assert not polar_transform(np.zeros(16, np.uint8)).any()


@pytest.mark.parametrize("n", range(1, 6))
def test_butterfly_matches_dense_product_on_basis(n):
    size = 1 << n
    eye = np.eye(size, dtype=np.uint8)
    gp = dense_generator(n)
    assert (polar_transform(eye) == gp).all()
    # G_p^{-1} = G^{(x)n} P^T since the kernel power is an involution over GF(2)
    g_inv = gf2_matmul(dense_kernel_power(n), dense_permutation(n).T)
    assert (gf2_matmul(gp, g_inv) == eye).all()
    assert (inverse_polar(eye) == g_inv).all()


@given(bit_vectors())
def test_roundtrip(l):
    assert (inverse_polar(polar_transform(l)) == l).all()
    assert (polar_transform(inverse_polar(l)) == l).all()


@given(bit_vectors(max_stages=6), bit_vectors(max_stages=6))
def test_linearity(a, b):
    if a.size != b.size:
        return
    assert (polar_transform(a ^ b) == polar_transform(a) ^ polar_transform(b)).all()


def test_roundtrip_batch():
    rng = np.random.default_rng(0)
    for n in range(1, 9):
        l = rng.integers(0, 2, (1000 // n, 1 << n), dtype=np.uint8)
        assert (inverse_polar(polar_transform(l)) == l).all()


@pytest.mark.parametrize("n", range(1, 9))
def test_row_weight_matches_dense_rows(n):
    g_inv = inverse_polar(np.eye(1 << n, dtype=np.uint8))
    assert [row_weight(i, n) for i in range(1 << n)] == g_inv.sum(axis=1).tolist()


def test_row_weight_examples():
    assert row_weight(0, 4) == 1
    assert row_weight(15, 4) == 16
    assert row_weight(5, 3) == 4
    with pytest.raises(IndexError):
        row_weight(8, 3)


def test_shape_errors():
    with pytest.raises(ShapeError):
        polar_transform(np.zeros(6, np.uint8))
    with pytest.raises(ShapeError):
        inverse_polar(np.zeros(1, np.uint8))
    with pytest.raises(ShapeError):
        PolarConfig(12)
    assert PolarConfig(64).n_stages == 6


@given(st.lists(st.integers(0, 1), min_size=1, max_size=300))
def test_packed_weight(bits):
    words = pack_bits(np.array(bits, dtype=np.uint8))
    assert words.shape == ((len(bits) + 63) // 64,)
    assert packed_weight(words) == sum(bits)
