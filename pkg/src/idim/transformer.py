"""Tiny pre-norm transformer encoder with exact manual backprop.

Token embedding + fixed sinusoidal positions, one or two pre-norm blocks
(single-head self-attention, two-layer tanh feed-forward), mean-pool over
positions, linear classification head.  Forward caches every intermediate
needed by the hand-written backward pass; no autodiff anywhere.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import InvalidDimensionError

_LN_EPS = 1e-5


@lru_cache(maxsize=32)
def _positions_cached(seq_len: int, model_dim: int, dtype_name: str) -> np.ndarray:
    pos = np.arange(seq_len, dtype=np.float64)[:, None]
    j = np.arange(model_dim // 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * j / model_dim)
    out = np.empty((seq_len, model_dim), dtype=np.float64)
    out[:, 0::2] = np.sin(angle)
    out[:, 1::2] = np.cos(angle)
    out = out.astype(np.dtype(dtype_name), copy=False)
    out.flags.writeable = False
    return out


def sinusoidal_positions(seq_len: int, model_dim: int, dtype=np.float64) -> np.ndarray:
    return _positions_cached(seq_len, model_dim, np.dtype(dtype).name)


def _ln_forward(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv
    return gamma * xhat + beta, (xhat, inv)


def _ln_backward(dy, gamma, cache):
    xhat, inv = cache
    dgamma = (dy * xhat).sum(axis=(0, 1))
    dbeta = dy.sum(axis=(0, 1))
    dxhat = dy * gamma
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dgamma, dbeta


def transformer_forward(spec, v: dict, tokens: np.ndarray):
    if tokens.ndim != 2 or tokens.shape[1] != spec.seq_len:
        raise InvalidDimensionError(
            f"expected token matrix of shape (batch, {spec.seq_len}), got {tokens.shape}")
    if tokens.min() < 0 or tokens.max() >= spec.vocab_size:
        raise InvalidDimensionError("token ids out of vocabulary range")
    dtype = v["embed.weight"].dtype
    dm = spec.model_dim
    alpha = 1.0 / np.sqrt(dm)

    x = v["embed.weight"][tokens] + sinusoidal_positions(spec.seq_len, dm, dtype)
    blocks = []
    for bidx in range(spec.num_blocks):
        p = f"block{bidx}"
        x_in = x
        a_in, ln1_cache = _ln_forward(x_in, v[f"{p}.ln1.gamma"], v[f"{p}.ln1.beta"])
        q = a_in @ v[f"{p}.attn.wq"] + v[f"{p}.attn.bq"]
        k = a_in @ v[f"{p}.attn.wk"] + v[f"{p}.attn.bk"]
        w_v = a_in @ v[f"{p}.attn.wv"] + v[f"{p}.attn.bv"]
        scores = q @ k.transpose(0, 2, 1) * alpha
        scores -= scores.max(axis=-1, keepdims=True)
        attn = np.exp(scores)
        attn /= attn.sum(axis=-1, keepdims=True)
        o = attn @ w_v
        x_mid = x_in + o @ v[f"{p}.attn.wo"] + v[f"{p}.attn.bo"]
        f_in, ln2_cache = _ln_forward(x_mid, v[f"{p}.ln2.gamma"], v[f"{p}.ln2.beta"])
        h = np.tanh(f_in @ v[f"{p}.ffn.w1"] + v[f"{p}.ffn.b1"])
        x = x_mid + h @ v[f"{p}.ffn.w2"] + v[f"{p}.ffn.b2"]
        blocks.append((a_in, ln1_cache, q, k, w_v, attn, o, f_in, ln2_cache, h))
    pooled = x.mean(axis=1)
    logits = pooled @ v["head.weight"] + v["head.bias"]
    return logits, (tokens, pooled, blocks)


def transformer_backward(spec, v: dict, gv: dict, cache, dlogits: np.ndarray) -> None:
    tokens, pooled, blocks = cache
    dm = spec.model_dim
    alpha = 1.0 / np.sqrt(dm)

    gv["head.weight"] += pooled.T @ dlogits
    gv["head.bias"] += dlogits.sum(axis=0)
    dpooled = dlogits @ v["head.weight"].T
    dx = np.broadcast_to(dpooled[:, None, :] / spec.seq_len,
                         (dpooled.shape[0], spec.seq_len, dm)).copy()

    for bidx in range(spec.num_blocks - 1, -1, -1):
        p = f"block{bidx}"
        a_in, ln1_cache, q, k, w_v, attn, o, f_in, ln2_cache, h = blocks[bidx]

        flat = lambda t: t.reshape(-1, t.shape[-1])

        # feed-forward sublayer: x_out = x_mid + tanh(f_in W1 + b1) W2 + b2
        gv[f"{p}.ffn.w2"] += flat(h).T @ flat(dx)
        gv[f"{p}.ffn.b2"] += dx.sum(axis=(0, 1))
        dpre = (dx @ v[f"{p}.ffn.w2"].T) * (1.0 - h * h)
        gv[f"{p}.ffn.w1"] += flat(f_in).T @ flat(dpre)
        gv[f"{p}.ffn.b1"] += dpre.sum(axis=(0, 1))
        df_in = dpre @ v[f"{p}.ffn.w1"].T
        dln2, dg2, db2 = _ln_backward(df_in, v[f"{p}.ln2.gamma"], ln2_cache)
        gv[f"{p}.ln2.gamma"] += dg2
        gv[f"{p}.ln2.beta"] += db2
        dx_mid = dx + dln2

        # attention sublayer: x_mid = x_in + (softmax(QK^T a) V) Wo + bo
        gv[f"{p}.attn.wo"] += flat(o).T @ flat(dx_mid)
        gv[f"{p}.attn.bo"] += dx_mid.sum(axis=(0, 1))
        do = dx_mid @ v[f"{p}.attn.wo"].T
        dattn = do @ w_v.transpose(0, 2, 1)
        dw_v = attn.transpose(0, 2, 1) @ do
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dscores *= alpha
        dq = dscores @ k
        dk = dscores.transpose(0, 2, 1) @ q
        gv[f"{p}.attn.wq"] += flat(a_in).T @ flat(dq)
        gv[f"{p}.attn.bq"] += dq.sum(axis=(0, 1))
        gv[f"{p}.attn.wk"] += flat(a_in).T @ flat(dk)
        gv[f"{p}.attn.bk"] += dk.sum(axis=(0, 1))
        gv[f"{p}.attn.wv"] += flat(a_in).T @ flat(dw_v)
        gv[f"{p}.attn.bv"] += dw_v.sum(axis=(0, 1))
        da_in = dq @ v[f"{p}.attn.wq"].T + dk @ v[f"{p}.attn.wk"].T + dw_v @ v[f"{p}.attn.wv"].T
        dln1, dg1, db1 = _ln_backward(da_in, v[f"{p}.ln1.gamma"], ln1_cache)
        gv[f"{p}.ln1.gamma"] += dg1
        gv[f"{p}.ln1.beta"] += db1
        dx = dx_mid + dln1

    # scatter-add token gradients via a one-hot matmul (much faster than
    # np.add.at for small vocabularies)
    flat_tokens = tokens.reshape(-1)
    onehot = (flat_tokens[:, None] == np.arange(spec.vocab_size)[None, :]).astype(dx.dtype)
    gv["embed.weight"] += onehot.T @ dx.reshape(-1, dm)
