import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idim.errors import CapacityError, InvalidDimensionError
from idim.projection import (adjoint, dense_adjoint, dense_project, make_dense, make_fastfood,
                             make_projection, project)
from idim.rng import SplitMix64

SHAPES = [(4, 16), (5, 33), (16, 1000)]


def materialize(p):
    return np.column_stack([project(p, np.eye(p.d)[j]) for j in range(p.d)])


def test_block_geometry():
    p = make_fastfood(7, 4, 16)
    assert (p.n, p.num_blocks) == (4, 4)
    p = make_fastfood(7, 5, 16)
    assert (p.n, p.num_blocks) == (8, 2)
    p = make_fastfood(7, 1, 3)
    assert (p.n, p.num_blocks) == (1, 3)


def test_degenerate_block_size_is_signed_scalar():
    p = make_fastfood(7, 1, 3)
    out = project(p, np.array([2.5]))
    assert np.allclose(np.abs(out), 2.5)


def test_determinism_bit_exact():
    a = make_fastfood(7, 4, 16)
    b = make_fastfood(7, 4, 16)
    for name in ("b", "g", "perm", "g_norm"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    x = SplitMix64(1).normals(4)
    assert np.array_equal(project(a, x), project(b, x))


def test_zero_maps_to_zero():
    p = make_fastfood(3, 6, 40)
    assert np.array_equal(project(p, np.zeros(6)), np.zeros(40))
    assert np.array_equal(adjoint(p, np.zeros(40)), np.zeros(6))


@pytest.mark.parametrize("d,D", SHAPES)
def test_matches_materialized_matrix(d, D):
    p = make_fastfood(7, d, D)
    M = materialize(p)
    s = SplitMix64(100 + d)
    for _ in range(5):
        x = s.normals(d)
        got = project(p, x)
        ref = M @ x
        assert np.abs(got - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())
    for i in range(min(D, 20)):
        row = adjoint(p, np.eye(D)[i])
        assert np.abs(row - M[i]).max() <= 1e-10


@pytest.mark.parametrize("d,D", SHAPES)
def test_adjoint_inner_product_identity(d, D):
    p = make_fastfood(11, d, D)
    s = SplitMix64(2024)
    for _ in range(100):
        x = s.normals(d)
        y = s.normals(D)
        a = float(project(p, x) @ y)
        b = float(x @ adjoint(p, y))
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


@pytest.mark.parametrize("d,D", SHAPES)
def test_per_block_unit_columns(d, D):
    # every full block contributes unit-norm columns; the truncated tail
    # block contributes columns of norm <= 1
    p = make_fastfood(5, d, D)
    M = materialize(p)
    full_rows = (D // p.n) * p.n
    if full_rows:
        blocks = M[:full_rows].reshape(-1, p.n, d)
        norms = np.linalg.norm(blocks, axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-10
    tail = M[full_rows:]
    if tail.size:
        assert np.linalg.norm(tail, axis=0).max() <= 1.0 + 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(1, 200), st.integers(0, 2**32))
def test_linearity_property(d, D, seed):
    p = make_fastfood(seed, d, D)
    s = SplitMix64(seed + 1)
    x, y = s.normals(d), s.normals(d)
    lhs = project(p, 2.0 * x - 0.5 * y)
    rhs = 2.0 * project(p, x) - 0.5 * project(p, y)
    assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(rhs).max())


def test_projected_entries_mean_near_zero():
    p = make_fastfood(13, 16, 4096)
    col = project(p, np.eye(16)[3])
    assert abs(col.mean()) <= 0.05


def test_float32_projection():
    p = make_fastfood(7, 8, 100)
    x = SplitMix64(2).normals(8).astype(np.float32)
    out = project(p, x)
    assert out.dtype == np.float32
    ref = project(p, x.astype(np.float64))
    assert np.abs(out - ref).max() <= 1e-4


def test_invalid_dimensions():
    with pytest.raises(InvalidDimensionError):
        make_fastfood(1, 0, 5)
    with pytest.raises(InvalidDimensionError):
        make_fastfood(1, 5, 0)
    p = make_fastfood(1, 4, 10)
    with pytest.raises(InvalidDimensionError):
        project(p, np.zeros(5))
    with pytest.raises(InvalidDimensionError):
        adjoint(p, np.zeros(11))


def test_config_roundtrip():
    p = make_fastfood(9, 6, 50)
    cfg = p.config()
    assert cfg == {"kind": "fastfood", "seed": 9, "d": 6, "D": 50}
    q = make_projection(**cfg)
    x = SplitMix64(0).normals(6)
    assert np.array_equal(project(p, x), project(q, x))


# dense oracle


def test_dense_unit_columns_and_transpose():
    p = make_dense(3, 8, 64)
    norms = np.linalg.norm(p.matrix, axis=0)
    assert np.abs(norms - 1.0).max() <= 1e-12
    s = SplitMix64(4)
    x, y = s.normals(8), s.normals(64)
    assert np.array_equal(dense_project(p, np.zeros(8)), np.zeros(64))
    a = dense_project(p, x) @ y
    b = x @ dense_adjoint(p, y)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_dense_capacity_cap():
    with pytest.raises(CapacityError, match="1.42 TB"):
        make_dense(0, 5000, 400000)
