"""Seeded structured linear maps from intrinsic space R^d to parameter space R^D.

The workhorse is the Fastfood-style factorization: the intrinsic vector is
zero-padded to the block size n = 2^ceil(log2 d) and each output block of n
coordinates is

    y_k = s_k * H G_k Pi_k H B_k x,     s_k = 1 / (sqrt(n) * ||g_k||_2)

with B_k a random +-1 diagonal, Pi_k a random permutation, G_k a random
standard-normal diagonal, and H the unnormalized Sylvester-Hadamard matrix
applied via the in-place fast transform.  ceil(D / n) independent blocks are
concatenated and truncated to D, so the implied D x d matrix never gets
materialized and every non-truncated column has exactly unit L2 norm.

A dense Gaussian projection with unit-norm columns is provided as a
small-scale oracle; it materializes the full matrix and is capped because
that stops scaling very quickly (a dense float32 map onto the ~355M
parameters of a large pretrained transformer at d = 1000 would already
need ~1.42 TB).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InvalidDimensionError
from .fwht import fwht_rows_inplace
from .rng import SplitMix64, mix

DENSE_ENTRY_CAP = 1 << 24


def block_size(d: int) -> int:
    """Smallest power of two >= d."""
    n = 1
    while n < d:
        n <<= 1
    return n


@dataclass(frozen=True)
class FastfoodProjection:
    """Immutable seeded block-structured map R^d -> R^D with adjoint.

    Fully determined by (seed, d, D); reconstruction is bit-identical.
    `perm` holds gather indices: (Pi t)[i] = t[perm[i]].
    """

    seed: int
    d: int
    D: int
    n: int
    num_blocks: int
    b: np.ndarray
    g: np.ndarray
    perm: np.ndarray
    inv_perm: np.ndarray
    g_norm: np.ndarray

    @property
    def kind(self) -> str:
        return "fastfood"

    def config(self) -> dict:
        return {"kind": "fastfood", "seed": self.seed, "d": self.d, "D": self.D}


@dataclass(frozen=True)
class DenseProjection:
    """Explicit D x d Gaussian matrix with unit-norm columns (oracle use)."""

    seed: int
    d: int
    D: int
    matrix: np.ndarray

    @property
    def kind(self) -> str:
        return "dense"

    def config(self) -> dict:
        return {"kind": "dense", "seed": self.seed, "d": self.d, "D": self.D}


def make_fastfood(seed: int, d: int, D: int) -> FastfoodProjection:
    """Construct the projection deterministically from (seed, d, D).

    Block k draws from the sub-stream mix(seed, k), in the fixed order
    g = normals(n), b = signs(n), perm = permutation(n).  An all-zero g
    draw (probability zero) is replaced by further draws from the same
    stream so g_norm > 0 always holds.
    """
    if d < 1 or D < 1:
        raise InvalidDimensionError(f"d and D must be positive, got d={d}, D={D}")
    n = block_size(d)
    num_blocks = -(-D // n)
    b = np.empty((num_blocks, n))
    g = np.empty((num_blocks, n))
    perm = np.empty((num_blocks, n), dtype=np.int64)
    for k in range(num_blocks):
        stream = SplitMix64(mix(seed, k))
        gk = stream.normals(n)
        while not np.any(gk):
            gk = stream.normals(n)
        g[k] = gk
        b[k] = stream.signs(n)
        perm[k] = stream.permutation(n)
    inv_perm = np.argsort(perm, axis=1)
    g_norm = np.linalg.norm(g, axis=1)
    return FastfoodProjection(
        seed=int(seed), d=d, D=D, n=n, num_blocks=num_blocks,
        b=b, g=g, perm=perm, inv_perm=inv_perm, g_norm=g_norm,
    )


def _scales(p: FastfoodProjection, dtype) -> np.ndarray:
    return (1.0 / (np.sqrt(p.n) * p.g_norm)).astype(dtype)[:, None]


def project(p: FastfoodProjection, theta_d: np.ndarray) -> np.ndarray:
    """Apply the implied matrix M: returns M @ theta_d, length D.

    Computed in theta_d's precision (float32 or float64).
    """
    theta_d = np.asarray(theta_d)
    if theta_d.shape != (p.d,):
        raise InvalidDimensionError(f"expected intrinsic vector of length {p.d}, got shape {theta_d.shape}")
    dtype = theta_d.dtype if theta_d.dtype in (np.float32, np.float64) else np.float64
    buf = np.zeros((p.num_blocks, p.n), dtype=dtype)
    buf[:, : p.d] = theta_d
    buf *= p.b
    fwht_rows_inplace(buf)
    buf = np.take_along_axis(buf, p.perm, axis=1)
    buf *= p.g
    fwht_rows_inplace(buf)
    buf *= _scales(p, dtype)
    return buf.reshape(-1)[: p.D].copy()


def adjoint(p: FastfoodProjection, g_D: np.ndarray) -> np.ndarray:
    """Apply the transpose: returns M.T @ g_D, length d."""
    g_D = np.asarray(g_D)
    if g_D.shape != (p.D,):
        raise InvalidDimensionError(f"expected full-space vector of length {p.D}, got shape {g_D.shape}")
    dtype = g_D.dtype if g_D.dtype in (np.float32, np.float64) else np.float64
    buf = np.zeros((p.num_blocks, p.n), dtype=dtype)
    buf.reshape(-1)[: p.D] = g_D
    buf *= _scales(p, dtype)
    fwht_rows_inplace(buf)
    buf *= p.g
    buf = np.take_along_axis(buf, p.inv_perm, axis=1)
    fwht_rows_inplace(buf)
    buf *= p.b
    return buf.sum(axis=0)[: p.d]


def make_dense(seed: int, d: int, D: int, max_entries: int = DENSE_ENTRY_CAP) -> DenseProjection:
    if d < 1 or D < 1:
        raise InvalidDimensionError(f"d and D must be positive, got d={d}, D={D}")
    if d * D > max_entries:
        raise CapacityError(
            f"dense projection would materialize {d}x{D} = {d * D} entries "
            f"(cap {max_entries}); dense maps do not scale — at d=1000 a large "
            f"~355M-parameter model needs ~1.42 TB — use kind='fastfood'"
        )
    stream = SplitMix64(mix(seed, 0))
    w = stream.normals(D * d).reshape(D, d)
    w /= np.linalg.norm(w, axis=0, keepdims=True)
    return DenseProjection(seed=int(seed), d=d, D=D, matrix=w)


def dense_project(p: DenseProjection, theta_d: np.ndarray) -> np.ndarray:
    theta_d = np.asarray(theta_d)
    if theta_d.shape != (p.d,):
        raise InvalidDimensionError(f"expected intrinsic vector of length {p.d}, got shape {theta_d.shape}")
    return (p.matrix.astype(theta_d.dtype, copy=False) @ theta_d)


def dense_adjoint(p: DenseProjection, g_D: np.ndarray) -> np.ndarray:
    g_D = np.asarray(g_D)
    if g_D.shape != (p.D,):
        raise InvalidDimensionError(f"expected full-space vector of length {p.D}, got shape {g_D.shape}")
    return p.matrix.T.astype(g_D.dtype, copy=False) @ g_D


def make_projection(kind: str, seed: int, d: int, D: int):
    """Factory matching the serialized {kind, seed, d, D} run-config record."""
    if kind == "fastfood":
        return make_fastfood(seed, d, D)
    if kind == "dense":
        return make_dense(seed, d, D)
    raise InvalidDimensionError(f"unknown projection kind {kind!r}")


def apply_projection(p, theta_d: np.ndarray) -> np.ndarray:
    if isinstance(p, FastfoodProjection):
        return project(p, theta_d)
    return dense_project(p, theta_d)


def apply_adjoint(p, g_D: np.ndarray) -> np.ndarray:
    if isinstance(p, FastfoodProjection):
        return adjoint(p, g_D)
    return dense_adjoint(p, g_D)
