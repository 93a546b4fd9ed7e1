import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idim.errors import InvalidDimensionError
from idim.fwht import fwht_inplace, fwht_rows_inplace, is_power_of_two, naive_hadamard_multiply
from idim.rng import SplitMix64

POWERS = [2**k for k in range(0, 11)]


def test_first_column_all_ones():
    v = np.array([1.0, 0.0, 0.0, 0.0])
    fwht_inplace(v)
    assert np.array_equal(v, np.ones(4))


def test_naive_small_columns():
    assert np.array_equal(naive_hadamard_multiply([1.0, 0.0]), [1.0, 1.0])
    assert np.array_equal(naive_hadamard_multiply([0.0, 1.0]), [1.0, -1.0])
    assert np.array_equal(naive_hadamard_multiply([1.0, 1.0, 1.0, 1.0]), [4.0, 0.0, 0.0, 0.0])


def test_involution_n4():
    v = SplitMix64(1).normals(4)
    w = v.copy()
    fwht_inplace(w)
    fwht_inplace(w)
    assert np.allclose(w, 4.0 * v, rtol=1e-12)


def test_seeded_oracle_n8_frozen():
    # 8 seeded uniforms pushed through the explicit-matrix oracle
    v = SplitMix64(8).uniforms(8)
    expect = naive_hadamard_multiply(v)
    got = v.copy()
    fwht_inplace(got)
    assert np.abs(got - expect).max() <= 1e-12


@pytest.mark.parametrize("n", POWERS)
def test_matches_naive_oracle(n):
    v = SplitMix64(n).normals(n)
    expect = naive_hadamard_multiply(v)
    got = v.copy()
    fwht_inplace(got)
    assert np.abs(got - expect).max() <= 1e-10


@pytest.mark.parametrize("n", [2**k for k in range(0, 13)])
def test_involution_and_parseval(n):
    v = SplitMix64(3 * n + 1).normals(n)
    w = v.copy()
    fwht_inplace(w)
    assert abs(np.dot(w, w) - n * np.dot(v, v)) <= 1e-12 * n * np.dot(v, v)
    fwht_inplace(w)
    assert np.abs(w - n * v).max() <= 1e-12 * max(1.0, np.abs(v).max()) * n


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 7), st.integers(0, 2**32))
def test_linearity_property(k, seed):
    n = 2**k
    s = SplitMix64(seed)
    x, y = s.normals(n), s.normals(n)
    a, b = 1.7, -0.3
    lhs = a * x + b * y
    fwht_inplace(lhs)
    fx, fy = x.copy(), y.copy()
    fwht_inplace(fx)
    fwht_inplace(fy)
    rhs = a * fx + b * fy
    scale = max(1.0, np.abs(rhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-12 * scale


def test_identity_for_n1():
    v = np.array([3.25])
    fwht_inplace(v)
    assert v[0] == 3.25


def test_float32_path():
    v = SplitMix64(4).normals(64).astype(np.float32)
    ref = naive_hadamard_multiply(v.astype(np.float64))
    fwht_inplace(v)
    assert np.abs(v.astype(np.float64) - ref).max() <= 1e-3


def test_rows_transform_matches_vector_calls():
    mat = SplitMix64(9).normals(4 * 16).reshape(4, 16)
    rows = mat.copy()
    fwht_rows_inplace(rows)
    for i in range(4):
        v = mat[i].copy()
        fwht_inplace(v)
        assert np.array_equal(rows[i], v)


@pytest.mark.parametrize("bad", [3, 5, 6, 12, 1000])
def test_non_power_of_two_rejected(bad):
    with pytest.raises(InvalidDimensionError):
        fwht_inplace(np.zeros(bad))
    with pytest.raises(InvalidDimensionError):
        naive_hadamard_multiply(np.zeros(bad))


def test_rejects_bad_buffers():
    with pytest.raises(InvalidDimensionError):
        fwht_inplace(np.zeros(4, dtype=np.int64))
    with pytest.raises(InvalidDimensionError):
        fwht_inplace(np.zeros((2, 2)))
    with pytest.raises(InvalidDimensionError):
        fwht_inplace(np.zeros(8)[::2])


def test_is_power_of_two():
    assert all(is_power_of_two(n) for n in POWERS)
    assert not any(is_power_of_two(n) for n in (0, -4, 3, 6, 1023))
