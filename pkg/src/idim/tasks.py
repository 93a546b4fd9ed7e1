"""Deterministic synthetic task generators plus a small TSV loader.

Synthetic kinds share latent structure through a family seed so that
pretraining on one task of a family transfers to the others:

* ``latent_linear`` — Gaussian inputs, label = sign of a linear functional
  of a family-shared feature map, optional label-flip noise.  Harder with
  more noise.
* ``sequence_rule`` — uniform token sequences; the label is a rule over
  token membership in a special set at ``rule_order`` designated positions:
  ``parity`` (odd membership count) or ``majority`` (more members than
  non-members; use odd orders for exactly balanced labels).  Order 1 is
  plain membership under either rule.  Difficulty ordering: parity gets
  harder with order (it is non-monotone in the inputs); and with
  ``family_aligned`` (the default) the set is the family's shared special
  set, which pretrained representations already separate, while unaligned
  tasks draw a fresh set from the task seed and are harder relative to a
  pretrained model.
* ``masked_pretrain`` — each sequence flips a fair coin and then draws its
  tokens mostly from the family's special set or mostly from the
  complement; one position is masked (token 0) and the label is the
  original token.  Predicting it requires inferring the dominant set from
  the visible tokens, which is what makes the learned representations
  transfer to the membership rules above.

Train and eval splits come from disjoint sub-streams of the task seed, so
they are disjoint by construction and bit-reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError
from .nn import Batch, ModelSpec
from .rng import MASK64, SplitMix64, finalize, mix

KINDS = ("latent_linear", "sequence_rule", "masked_pretrain", "tsv")

MASK_TOKEN = 0

# sub-stream tags (arbitrary distinct constants)
_T_FAMILY_SET = 0x11
_T_DIRECTION = 0x21
_T_POSITIONS = 0x22
_T_TASK_SET = 0x23
_T_TRAIN_X = 0x31
_T_EVAL_X = 0x32
_T_TRAIN_NOISE = 0x41
_T_EVAL_NOISE = 0x42
_T_TRAIN_MASK = 0x51
_T_EVAL_MASK = 0x52


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    seed: int
    num_train: int
    num_eval: int
    num_classes: int = 2
    name: str = ""
    family_seed: int | None = None
    # latent_linear knobs
    input_dim: int = 16
    latent_dim: int = 16
    noise: float = 0.0
    # sequence kinds
    vocab_size: int = 33
    seq_len: int = 16
    rule_order: int = 1
    rule_kind: str = "parity"
    rule_margin: int = 0
    family_aligned: bool = True
    # tsv
    tsv_path: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown task kind {self.kind!r}, expected one of {KINDS}")
        if self.kind != "tsv" and (self.num_train < 1 or self.num_eval < 1):
            raise ConfigError("num_train and num_eval must be positive")
        if not 0.0 <= self.noise < 1.0:
            raise ConfigError("noise must be in [0, 1)")
        if self.kind == "latent_linear":
            if self.num_classes != 2:
                raise ConfigError("latent_linear is a binary task")
            if self.input_dim < 1 or self.latent_dim < 1:
                raise ConfigError("latent_linear needs positive input_dim and latent_dim")
        if self.kind == "sequence_rule":
            if self.num_classes != 2:
                raise ConfigError("sequence_rule is a binary task")
            if not 1 <= self.rule_order <= self.seq_len:
                raise ConfigError("rule_order must be in [1, seq_len]")
            if self.rule_kind not in ("parity", "majority"):
                raise ConfigError("rule_kind must be 'parity' or 'majority'")
            if self.rule_margin < 0:
                raise ConfigError("rule_margin must be >= 0")
            if self.rule_kind == "parity" and self.rule_margin != 0:
                raise ConfigError("rule_margin only applies to majority rules")
            if self.rule_kind == "majority" and 2 * self.rule_margin + 1 > self.rule_order:
                raise ConfigError("rule_margin too large for rule_order")
        if self.kind in ("sequence_rule", "masked_pretrain"):
            if self.vocab_size < 5 or self.seq_len < 2:
                raise ConfigError("sequence tasks need vocab_size >= 5 and seq_len >= 2")
        if self.kind == "masked_pretrain" and self.num_classes != self.vocab_size:
            raise ConfigError("masked_pretrain must have num_classes == vocab_size")

    @property
    def family(self) -> int:
        return self.seed if self.family_seed is None else self.family_seed

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "latent_linear":
            return f"latent_linear(p={self.input_dim},noise={self.noise:g})"
        if self.kind == "sequence_rule":
            align = "aligned" if self.family_aligned else "unaligned"
            return f"sequence_rule({self.rule_kind},order={self.rule_order},{align})"
        return self.kind


@dataclass
class Dataset:
    train: Batch
    eval: Batch
    spec: TaskSpec
    num_classes: int

    @property
    def input_dim(self) -> int:
        return int(self.train.inputs.shape[1]) if self.train.inputs.ndim == 2 else 0


def family_token_set(family_seed: int, vocab_size: int) -> np.ndarray:
    """The family's special token subset: half of [1, vocab), sorted.

    Token 0 is reserved for masking and never belongs to either half.
    """
    usable = np.arange(1, vocab_size, dtype=np.int64)
    perm = SplitMix64(mix(family_seed, _T_FAMILY_SET)).permutation(len(usable))
    return np.sort(usable[perm[: len(usable) // 2]])


def _family_complement(special: np.ndarray, vocab_size: int) -> np.ndarray:
    usable = np.arange(1, vocab_size, dtype=np.int64)
    return np.setdiff1d(usable, special)


def _flip_labels(labels: np.ndarray, rate: float, stream: SplitMix64) -> np.ndarray:
    if rate <= 0.0:
        return labels
    flips = stream.uniforms(len(labels)) < rate
    return np.where(flips, 1 - labels, labels)


def _latent_linear_split(spec: TaskSpec, count: int, x_tag: int, noise_tag: int,
                         feat: np.ndarray, w: np.ndarray) -> Batch:
    x = SplitMix64(mix(spec.seed, x_tag)).normals(count * spec.input_dim)
    x = x.reshape(count, spec.input_dim)
    score = (x @ feat.T) @ w
    labels = (score > 0).astype(np.int64)
    labels = _flip_labels(labels, spec.noise, SplitMix64(mix(spec.seed, noise_tag)))
    return Batch(x, labels)


def _sequence_split(spec: TaskSpec, count: int, x_tag: int, noise_tag: int,
                    special: np.ndarray, positions: np.ndarray) -> Batch:
    """Uniform token sequences labeled by the configured membership rule.

    With a positive rule_margin, sequences whose membership count falls
    within margin of the majority boundary are rejected and redrawn, so
    labels stay well-separated; rejection is deterministic given the
    stream.
    """
    stream = SplitMix64(mix(spec.seed, x_tag))
    toks, labs, have = [], [], 0
    while have < count:
        n = count - have if spec.rule_margin == 0 else max(2 * (count - have), 64)
        tokens = stream.randints(spec.vocab_size - 1, n * spec.seq_len) + 1
        tokens = tokens.reshape(n, spec.seq_len)
        count_m = np.isin(tokens[:, positions], special).sum(axis=1)
        if spec.rule_kind == "parity":
            labels = (count_m % 2).astype(np.int64)
            keep = np.ones(n, dtype=bool)
        else:
            labels = (2 * count_m > spec.rule_order).astype(np.int64)
            keep = np.abs(2 * count_m - spec.rule_order) >= 2 * spec.rule_margin + 1
        toks.append(tokens[keep][: count - have])
        labs.append(labels[keep][: count - have])
        have += toks[-1].shape[0]
    tokens = np.concatenate(toks)
    labels = _flip_labels(np.concatenate(labs), spec.noise, SplitMix64(mix(spec.seed, noise_tag)))
    return Batch(tokens, labels)


def _masked_split(spec: TaskSpec, count: int, x_tag: int, mask_tag: int,
                  special: np.ndarray, other: np.ndarray) -> Batch:
    """Set-dominant sequences with one masked position to reconstruct.

    Each sequence draws from its dominant set with probability 1 - noise
    per position, so the masked token is best predicted by inferring the
    dominant set from the visible tokens.
    """
    stream = SplitMix64(mix(spec.seed, x_tag))
    dominant_special = stream.uniforms(count) < 0.5
    pick_other = stream.uniforms(count * spec.seq_len).reshape(count, spec.seq_len) < spec.noise
    u_tok = stream.uniforms(count * spec.seq_len).reshape(count, spec.seq_len)
    use_special = dominant_special[:, None] ^ pick_other
    sizes = np.where(use_special, len(special), len(other))
    idx = np.minimum((u_tok * sizes).astype(np.int64), sizes - 1)
    tokens = np.where(use_special, special[np.minimum(idx, len(special) - 1)],
                      other[np.minimum(idx, len(other) - 1)])
    mask_pos = SplitMix64(mix(spec.seed, mask_tag)).randints(spec.seq_len, count)
    rows = np.arange(count)
    labels = tokens[rows, mask_pos].astype(np.int64)
    tokens = tokens.copy()
    tokens[rows, mask_pos] = MASK_TOKEN
    return Batch(tokens, labels)


def designated_positions(spec: TaskSpec) -> np.ndarray:
    perm = SplitMix64(mix(spec.seed, _T_POSITIONS)).permutation(spec.seq_len)
    return np.sort(perm[: spec.rule_order])


def generate(spec: TaskSpec) -> Dataset:
    """Materialize the train and eval splits for a synthetic task spec."""
    if spec.kind == "tsv":
        raise ConfigError("tsv tasks are loaded with load_tsv, not generated")
    if spec.kind == "latent_linear":
        feat = SplitMix64(mix(spec.family, _T_FAMILY_SET)).normals(
            spec.latent_dim * spec.input_dim).reshape(spec.latent_dim, spec.input_dim)
        w = SplitMix64(mix(spec.seed, _T_DIRECTION)).normals(spec.latent_dim)
        train = _latent_linear_split(spec, spec.num_train, _T_TRAIN_X, _T_TRAIN_NOISE, feat, w)
        ev = _latent_linear_split(spec, spec.num_eval, _T_EVAL_X, _T_EVAL_NOISE, feat, w)
        return Dataset(train, ev, spec, 2)
    special = family_token_set(spec.family, spec.vocab_size)
    if spec.kind == "sequence_rule":
        if not spec.family_aligned:
            usable = np.arange(1, spec.vocab_size, dtype=np.int64)
            perm = SplitMix64(mix(spec.seed, _T_TASK_SET)).permutation(len(usable))
            special = np.sort(usable[perm[: len(usable) // 2]])
        positions = designated_positions(spec)
        train = _sequence_split(spec, spec.num_train, _T_TRAIN_X, _T_TRAIN_NOISE, special, positions)
        ev = _sequence_split(spec, spec.num_eval, _T_EVAL_X, _T_EVAL_NOISE, special, positions)
        return Dataset(train, ev, spec, 2)
    other = _family_complement(special, spec.vocab_size)
    train = _masked_split(spec, spec.num_train, _T_TRAIN_X, _T_TRAIN_MASK, special, other)
    ev = _masked_split(spec, spec.num_eval, _T_EVAL_X, _T_EVAL_MASK, special, other)
    return Dataset(train, ev, spec, spec.vocab_size)


def check_model_compat(model: ModelSpec, data: Dataset) -> None:
    """Raise ConfigError when a model spec cannot consume a dataset."""
    if model.num_classes != data.num_classes:
        raise ConfigError(f"model has {model.num_classes} classes, task has {data.num_classes}")
    if model.arch in ("logreg", "mlp"):
        if data.train.inputs.ndim != 2 or not np.issubdtype(data.train.inputs.dtype, np.floating):
            raise ConfigError(f"{model.arch} needs float feature inputs")
        if data.input_dim != model.input_dim:
            raise ConfigError(f"model input_dim {model.input_dim} != task feature dim {data.input_dim}")
    else:
        if not np.issubdtype(data.train.inputs.dtype, np.integer):
            raise ConfigError("tiny_transformer needs integer token inputs")
        if data.train.inputs.shape[1] != model.seq_len:
            raise ConfigError(f"model seq_len {model.seq_len} != task seq_len {data.train.inputs.shape[1]}")
        if int(data.train.inputs.max()) >= model.vocab_size:
            raise ConfigError("task tokens exceed model vocab_size")


# ---------------------------------------------------------------------------
# TSV loading

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    return h


@dataclass(frozen=True)
class TsvSchema:
    """Column roles for load_tsv: features are (name, "float"|"text") pairs."""

    features: tuple
    label: str
    text_dim: int = 64
    train_fraction: float = 0.75

    def __post_init__(self):
        if not self.features:
            raise ConfigError("schema needs at least one feature column")
        for item in self.features:
            if len(item) != 2 or item[1] not in ("float", "text"):
                raise ConfigError(f"bad feature spec {item!r}; expected (name, 'float'|'text')")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.text_dim < 1:
            raise ConfigError("text_dim must be positive")

    @property
    def feature_dim(self) -> int:
        return sum(1 if t == "float" else self.text_dim for _, t in self.features)


def _encode_row(schema: TsvSchema, row: dict, row_num: int) -> np.ndarray:
    out = np.zeros(schema.feature_dim)
    off = 0
    for name, typ in schema.features:
        raw = row[name]
        if typ == "float":
            try:
                out[off] = float(raw)
            except ValueError:
                raise DataError(f"row {row_num}: column {name!r}: cannot parse {raw!r} as float") from None
            off += 1
        else:
            for token in raw.split():
                out[off + fnv1a64(token) % schema.text_dim] += 1.0
            off += schema.text_dim
    return out


def load_tsv(path: str, schema: TsvSchema, seed: int = 0, name: str = "") -> Dataset:
    """Load a header-rowed TSV into a Dataset.

    Text columns become hashed bag-of-tokens counts (64-bit FNV-1a modulo
    text_dim).  Labels are the sorted distinct label strings mapped to 0..K-1.
    Row i (1-based, header excluded) goes to the train split when the
    splitmix64-mixed hash of (seed, i), scaled to [0, 1), is below
    train_fraction.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        header = reader.fieldnames or []
        needed = [n for n, _ in schema.features] + [schema.label]
        for col in needed:
            if col not in header:
                raise DataError(f"missing column {col!r} in header of {path}")
        feats, labels_raw, to_train = [], [], []
        for row_num, row in enumerate(reader, start=1):
            if any(row.get(col) is None for col in needed):
                raise DataError(f"row {row_num}: short row, expected {len(header)} columns")
            feats.append(_encode_row(schema, row, row_num))
            labels_raw.append(row[schema.label])
            u = (finalize(mix(seed, row_num)) >> 11) * 2.0 ** -53
            to_train.append(u < schema.train_fraction)
    if not feats:
        raise DataError(f"no data rows in {path}")
    classes = sorted(set(labels_raw))
    class_ix = {c: i for i, c in enumerate(classes)}
    x = np.stack(feats)
    y = np.array([class_ix[c] for c in labels_raw], dtype=np.int64)
    to_train = np.array(to_train)
    if not to_train.any() or to_train.all():
        raise DataError(f"degenerate split for {path}: one side is empty; adjust seed or train_fraction")
    spec = TaskSpec(kind="tsv", seed=seed, num_train=int(to_train.sum()),
                    num_eval=int((~to_train).sum()), num_classes=len(classes),
                    name=name or f"tsv:{path}", input_dim=schema.feature_dim, tsv_path=str(path))
    return Dataset(Batch(x[to_train], y[to_train]), Batch(x[~to_train], y[~to_train]),
                   spec, len(classes))
