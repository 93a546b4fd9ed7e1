import numpy as np
import pytest

from idim.errors import ConfigError, InvalidDimensionError, NumericError
from idim.nn import (Batch, ModelSpec, ParameterVector, evaluate, init_params, loss_and_grad,
                     margin_loss, param_count, reseed_head, transplant_body)
from idim.rng import SplitMix64

LOGREG = ModelSpec(arch="logreg", num_classes=2, input_dim=4)
MLP = ModelSpec(arch="mlp", num_classes=2, input_dim=4, hidden=(8,))
TINY = ModelSpec(arch="tiny_transformer", num_classes=3, vocab_size=11, seq_len=6,
                 model_dim=8, ff_dim=16, num_blocks=1)
TINY2 = ModelSpec(arch="tiny_transformer", num_classes=3, vocab_size=11, seq_len=6,
                  model_dim=8, ff_dim=16, num_blocks=2)


def random_batch(spec, n, seed):
    s = SplitMix64(seed)
    if spec.arch == "tiny_transformer":
        inputs = s.randints(spec.vocab_size, n * spec.seq_len).reshape(n, spec.seq_len)
    else:
        inputs = s.normals(n * spec.input_dim).reshape(n, spec.input_dim)
    return Batch(inputs, s.randints(spec.num_classes, n))


def central_diff(spec, params, batch, h=1e-5):
    fd = np.zeros(params.dim)
    for i in range(params.dim):
        up = params.copy()
        up.values[i] += h
        down = params.copy()
        down.values[i] -= h
        fd[i] = (evaluate(spec, up, batch)[0] - evaluate(spec, down, batch)[0]) / (2 * h)
    return fd


def test_param_counting():
    assert param_count(LOGREG) == 4 * 2 + 2
    assert param_count(MLP) == 4 * 8 + 8 + 8 * 2 + 2 == 58
    assert init_params(LOGREG, 0).num_layers == 2


def test_partition_covers_every_spec():
    for spec in (LOGREG, MLP, TINY, TINY2):
        pv = init_params(spec, 1)
        assert sum(seg.length for seg in pv.partition) == pv.dim == param_count(spec)
        assert len({seg.name for seg in pv.partition}) == pv.num_layers


def test_init_deterministic_and_scaled():
    a = init_params(MLP, 7)
    b = init_params(MLP, 7)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, init_params(MLP, 8).values)
    assert np.array_equal(a.segment("layer0.bias"), np.zeros(8))


def test_layernorm_gains_init_to_one():
    pv = init_params(TINY, 0)
    assert np.array_equal(pv.segment("block0.ln1.gamma"), np.ones(8))
    assert np.array_equal(pv.segment("block0.ln1.beta"), np.zeros(8))


def test_zero_params_uniform_loss():
    spec = ModelSpec(arch="logreg", num_classes=5, input_dim=3)
    pv = init_params(spec, 0)
    pv.values[:] = 0.0
    loss, _, _ = loss_and_grad(spec, pv, random_batch(spec, 12, 3))
    assert loss == pytest.approx(np.log(5), rel=1e-12)


@pytest.mark.parametrize("spec", [LOGREG, MLP, TINY, TINY2], ids=["logreg", "mlp", "tiny1", "tiny2"])
@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_central_differences(spec, seed):
    params = init_params(spec, seed)
    batch = random_batch(spec, 5, 100 + seed)
    _, grad, _ = loss_and_grad(spec, params, batch)
    fd = central_diff(spec, params, batch)
    rel = np.abs(grad - fd) / np.maximum(1e-6, np.abs(fd))
    assert rel.max() <= 1e-4


def test_duplicated_batch_invariance():
    batch = random_batch(MLP, 6, 9)
    double = Batch(np.concatenate([batch.inputs, batch.inputs]),
                   np.concatenate([batch.labels, batch.labels]))
    params = init_params(MLP, 2)
    l1, g1, a1 = loss_and_grad(MLP, params, batch)
    l2, g2, a2 = loss_and_grad(MLP, params, double)
    assert l1 == pytest.approx(l2, rel=1e-12)
    assert a1 == a2
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-15)


def test_batch_permutation_invariance():
    batch = random_batch(TINY, 8, 21)
    perm = SplitMix64(1).permutation(8)
    shuffled = Batch(batch.inputs[perm], batch.labels[perm])
    params = init_params(TINY, 4)
    l1, g1, _ = loss_and_grad(TINY, params, batch)
    l2, g2, _ = loss_and_grad(TINY, params, shuffled)
    assert l1 == pytest.approx(l2, rel=1e-12)
    assert np.allclose(g1, g2, rtol=1e-12, atol=1e-14)


def test_determinism_bitwise():
    batch = random_batch(MLP, 6, 5)
    params = init_params(MLP, 5)
    l1, g1, _ = loss_and_grad(MLP, params, batch)
    l2, g2, _ = loss_and_grad(MLP, params, batch)
    assert l1 == l2
    assert np.array_equal(g1, g2)


def test_nonfinite_params_raise_numeric_error():
    params = init_params(LOGREG, 0)
    params.values[:] = np.inf
    with pytest.raises(NumericError):
        loss_and_grad(LOGREG, params, random_batch(LOGREG, 4, 2))


def test_margin_loss_cases():
    assert margin_loss(np.array([[2.0, 0.0]]), np.array([0]), 0.0) == 0.0
    assert margin_loss(np.array([[2.0, 0.0]]), np.array([0]), 2.0) == 1.0
    assert margin_loss(np.array([[1.0, 1.0]]), np.array([0]), 0.0) == 1.0
    with pytest.raises(ConfigError):
        margin_loss(np.array([[1.0, 0.0]]), np.array([0]), -0.1)


def test_margin_zero_is_error_rate():
    spec = ModelSpec(arch="logreg", num_classes=4, input_dim=6)
    params = init_params(spec, 3)
    batch = random_batch(spec, 64, 8)
    from idim.nn import forward

    logits, _ = forward(spec, params.values, batch.inputs)
    _, acc = evaluate(spec, params, batch)
    assert margin_loss(logits, batch.labels, 0.0) == pytest.approx(1.0 - acc, abs=1e-12)


def test_reseed_head_touches_only_head():
    pv = init_params(MLP, 1)
    out = reseed_head(MLP, pv, seed=99)
    assert np.array_equal(out.segment("layer0.weight"), pv.segment("layer0.weight"))
    assert not np.array_equal(out.segment("head.weight"), pv.segment("head.weight"))
    assert np.array_equal(out.segment("head.bias"), np.zeros(2))


def test_transplant_body_swaps_head_shape():
    src = init_params(TINY, 6)
    dst_spec = ModelSpec(arch="tiny_transformer", num_classes=2, vocab_size=11, seq_len=6,
                         model_dim=8, ff_dim=16, num_blocks=1)
    out = transplant_body(src, dst_spec, head_seed=5)
    assert out.segment("head.weight").shape[0] == 8 * 2
    assert np.array_equal(out.segment("embed.weight"), src.segment("embed.weight"))
    assert np.array_equal(out.segment("block0.attn.wq"), src.segment("block0.attn.wq"))


def test_bad_partition_rejected():
    with pytest.raises(InvalidDimensionError):
        ParameterVector(np.zeros(4), (type(init_params(LOGREG, 0).partition[0])("a", 0, 3),))


def test_spec_validation():
    with pytest.raises(ConfigError):
        ModelSpec(arch="cnn", num_classes=2)
    with pytest.raises(ConfigError):
        ModelSpec(arch="mlp", num_classes=2, input_dim=4, hidden=())
    with pytest.raises(ConfigError):
        ModelSpec(arch="tiny_transformer", num_classes=2, vocab_size=8, seq_len=4,
                  model_dim=7, ff_dim=8)


def test_token_range_validated():
    params = init_params(TINY, 0)
    bad = Batch(np.full((2, 6), 11), np.zeros(2, dtype=np.int64))
    with pytest.raises(InvalidDimensionError):
        loss_and_grad(TINY, params, bad)
