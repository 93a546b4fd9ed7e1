import numpy as np
import pytest

from idim.errors import ConfigError, DataError
from idim.nn import ModelSpec
from idim.rng import SplitMix64
from idim.tasks import (Dataset, TaskSpec, TsvSchema, check_model_compat, family_token_set,
                        fnv1a64, generate, load_tsv)


def latent(seed=5, **kw):
    base = dict(kind="latent_linear", seed=seed, num_train=256, num_eval=256,
                input_dim=8, latent_dim=8, noise=0.0)
    base.update(kw)
    return TaskSpec(**base)


def seqrule(seed=5, **kw):
    base = dict(kind="sequence_rule", seed=seed, num_train=128, num_eval=128,
                vocab_size=17, seq_len=8, rule_order=1)
    base.update(kw)
    return TaskSpec(**base)


def masked(seed=5, **kw):
    base = dict(kind="masked_pretrain", seed=seed, num_train=128, num_eval=128,
                num_classes=17, vocab_size=17, seq_len=8, noise=0.2)
    base.update(kw)
    return TaskSpec(**base)


@pytest.mark.parametrize("spec_fn", [latent, seqrule, masked])
def test_generation_deterministic(spec_fn):
    a = generate(spec_fn())
    b = generate(spec_fn())
    assert np.array_equal(a.train.inputs, b.train.inputs)
    assert np.array_equal(a.train.labels, b.train.labels)
    assert np.array_equal(a.eval.inputs, b.eval.inputs)


@pytest.mark.parametrize("spec_fn", [latent, seqrule, masked])
def test_splits_differ(spec_fn):
    data = generate(spec_fn())
    assert data.train.inputs.shape[0] == 128 if spec_fn is not latent else True
    assert not np.array_equal(data.train.inputs[: len(data.eval.inputs)], data.eval.inputs)


def test_latent_linear_balanced():
    data = generate(latent(num_train=4096, num_eval=512))
    assert abs(data.train.labels.mean() - 0.5) <= 0.05


def test_latent_linear_noise_flips_labels():
    clean = generate(latent())
    noisy = generate(latent(noise=0.25))
    flips = (clean.train.labels != noisy.train.labels).mean()
    assert 0.1 < flips < 0.4
    assert np.array_equal(clean.train.inputs, noisy.train.inputs)


def test_latent_family_shares_feature_map():
    a = generate(latent(seed=1, family_seed=9))
    b = generate(latent(seed=2, family_seed=9))
    c = generate(latent(seed=1, family_seed=10))
    # same task seed, same family -> same inputs; different family -> same
    # inputs but different labels (feature map changed)
    assert not np.array_equal(a.train.labels, b.train.labels)
    assert np.array_equal(a.train.inputs, c.train.inputs)
    assert not np.array_equal(a.train.labels, c.train.labels)


def test_sequence_rule_tokens_and_balance():
    data = generate(seqrule(num_train=4096))
    assert data.train.inputs.min() >= 1
    assert data.train.inputs.max() < 17
    assert abs(data.train.labels.mean() - 0.5) <= 0.05


def test_sequence_rule_alignment_knob():
    aligned = generate(seqrule(family_seed=3))
    unaligned = generate(seqrule(family_seed=3, family_aligned=False))
    assert np.array_equal(aligned.train.inputs, unaligned.train.inputs)
    assert not np.array_equal(aligned.train.labels, unaligned.train.labels)


def test_majority_margin_separates_counts():
    spec = seqrule(rule_kind="majority", rule_order=7, rule_margin=1, num_train=512)
    data = generate(spec)
    special = family_token_set(spec.family, spec.vocab_size)
    from idim.tasks import designated_positions

    pos = designated_positions(spec)
    counts = np.isin(data.train.inputs[:, pos], special).sum(axis=1)
    assert np.all(np.abs(2 * counts - 7) >= 3)
    assert np.array_equal(data.train.labels, (2 * counts > 7).astype(np.int64))


def test_parity_rule_math():
    spec = seqrule(rule_order=3)
    data = generate(spec)
    special = family_token_set(spec.family, spec.vocab_size)
    from idim.tasks import designated_positions

    pos = designated_positions(spec)
    counts = np.isin(data.train.inputs[:, pos], special).sum(axis=1)
    assert np.array_equal(data.train.labels, counts % 2)


def test_masked_pretrain_shapes_and_mask():
    data = generate(masked())
    rows = np.arange(data.train.inputs.shape[0])
    assert set(np.unique((data.train.inputs == 0).sum(axis=1))) == {1}
    assert data.train.labels.min() >= 1
    assert data.num_classes == 17
    # the masked position's label never equals the visible mask token
    mask_pos = (data.train.inputs == 0).argmax(axis=1)
    assert np.all(data.train.inputs[rows, mask_pos] == 0)


def test_masked_pretrain_dominance_structure():
    spec = masked(num_train=512, noise=0.1)
    data = generate(spec)
    special = family_token_set(spec.family, spec.vocab_size)
    member_frac = np.isin(data.train.inputs, special).sum(axis=1) / (spec.seq_len - 1)
    # sequences should be strongly polarized toward one set or the other
    assert ((member_frac > 0.7) | (member_frac < 0.3)).mean() > 0.9


def test_family_token_set_excludes_mask():
    s = family_token_set(42, 33)
    assert s.min() >= 1 and s.max() < 33
    assert len(s) == 16
    assert np.array_equal(family_token_set(42, 33), s)


def test_spec_validation():
    with pytest.raises(ConfigError):
        TaskSpec(kind="mystery", seed=0, num_train=8, num_eval=8)
    with pytest.raises(ConfigError):
        latent(num_classes=3)
    with pytest.raises(ConfigError):
        seqrule(rule_order=99)
    with pytest.raises(ConfigError):
        seqrule(rule_kind="median")
    with pytest.raises(ConfigError):
        seqrule(rule_margin=1)  # parity takes no margin
    with pytest.raises(ConfigError):
        masked(num_classes=5)
    with pytest.raises(ConfigError):
        generate(TaskSpec(kind="tsv", seed=0, num_train=1, num_eval=1))


def test_check_model_compat():
    data = generate(latent())
    check_model_compat(ModelSpec(arch="mlp", num_classes=2, input_dim=8, hidden=(4,)), data)
    with pytest.raises(ConfigError):
        check_model_compat(ModelSpec(arch="mlp", num_classes=2, input_dim=9, hidden=(4,)), data)
    seq = generate(seqrule())
    check_model_compat(ModelSpec(arch="tiny_transformer", num_classes=2, vocab_size=17,
                                 seq_len=8, model_dim=8, ff_dim=16), seq)
    with pytest.raises(ConfigError):
        check_model_compat(ModelSpec(arch="logreg", num_classes=2, input_dim=8), seq)


# TSV loading


def write_tsv(tmp_path, text):
    path = tmp_path / "data.tsv"
    path.write_text(text, encoding="utf-8")
    return str(path)


SCHEMA = TsvSchema(features=(("x1", "float"), ("x2", "float")), label="y")


def test_tsv_roundtrip_and_split(tmp_path):
    path = write_tsv(tmp_path, "x1\tx2\ty\n1.0\t2.0\ta\n3.0\t4.0\tb\n5.0\t6.0\ta\n7.0\t8.0\tb\n")
    # seed chosen so the hash split lands 3 train / 1 eval
    data = load_tsv(path, SCHEMA, seed=2)
    assert data.train.inputs.shape == (3, 2)
    assert data.eval.inputs.shape == (1, 2)
    assert data.num_classes == 2
    again = load_tsv(path, SCHEMA, seed=2)
    assert np.array_equal(data.train.inputs, again.train.inputs)


def test_tsv_text_hashing(tmp_path):
    schema = TsvSchema(features=(("t", "text"),), label="y", text_dim=16)
    path = write_tsv(tmp_path, "t\ty\nhello world hello\t1\nbye\t0\nfoo bar\t1\nbaz\t0\n")
    data = load_tsv(path, schema, seed=2)
    row0 = np.zeros(16)
    for tok in "hello world hello".split():
        row0[fnv1a64(tok) % 16] += 1
    stacked = np.concatenate([data.train.inputs, data.eval.inputs])
    assert any(np.array_equal(r, row0) for r in stacked)


def test_tsv_bad_float_names_row(tmp_path):
    path = write_tsv(tmp_path, "x1\tx2\ty\n1.0\t2.0\ta\nabc\t4.0\tb\n5.0\t6.0\ta\n1\t1\tb\n")
    with pytest.raises(DataError, match="row 2"):
        load_tsv(path, SCHEMA, seed=2)


def test_tsv_missing_column(tmp_path):
    path = write_tsv(tmp_path, "x1\ty\n1.0\ta\n2.0\tb\n")
    with pytest.raises(DataError, match="x2"):
        load_tsv(path, SCHEMA, seed=0)


def test_fnv1a64_reference():
    # classic FNV-1a test vectors
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("a") == 0xAF63DC4C8601EC8C
