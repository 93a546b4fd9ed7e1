"""Minimal exact-gradient model zoo over flat parameter vectors.

Three architectures (logistic regression, tanh MLP, tiny transformer
encoder) share one representation: all parameters live in a single flat
vector with a named layer partition, and every architecture provides an
analytic backward pass returning the exact gradient of the mean
cross-entropy loss as one flat vector.  Backprop is written out by hand so
the gradients can be held to tight finite-difference oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InvalidDimensionError, NumericError
from .rng import SplitMix64, mix

ARCHS = ("logreg", "mlp", "tiny_transformer")


@dataclass(frozen=True)
class LayerSegment:
    name: str
    offset: int
    length: int


@dataclass
class ParameterVector:
    """Flat parameter array plus the ordered layer partition covering it."""

    values: np.ndarray
    partition: tuple[LayerSegment, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 1:
            raise InvalidDimensionError("parameter values must be a flat vector")
        off = 0
        names = set()
        for seg in self.partition:
            if seg.offset != off or seg.length < 1:
                raise InvalidDimensionError(f"partition segment {seg.name} breaks contiguous coverage")
            if seg.name in names:
                raise InvalidDimensionError(f"duplicate layer name {seg.name}")
            names.add(seg.name)
            off += seg.length
        if off != self.values.shape[0]:
            raise InvalidDimensionError(f"partition covers {off} of {self.values.shape[0]} parameters")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_layers(self) -> int:
        return len(self.partition)

    def segment(self, name: str) -> np.ndarray:
        for seg in self.partition:
            if seg.name == name:
                return self.values[seg.offset : seg.offset + seg.length]
        raise KeyError(name)

    def segment_lengths(self) -> np.ndarray:
        return np.array([seg.length for seg in self.partition], dtype=np.int64)

    def copy(self) -> "ParameterVector":
        return ParameterVector(self.values.copy(), self.partition)

    def astype(self, dtype) -> "ParameterVector":
        return ParameterVector(self.values.astype(dtype), self.partition)


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyperparameters; exactly one arch's fields are used."""

    arch: str
    num_classes: int
    head_init_seed: int = 0
    input_dim: int = 0           # logreg, mlp
    hidden: tuple = ()           # mlp
    vocab_size: int = 0          # tiny_transformer
    seq_len: int = 0
    model_dim: int = 0
    ff_dim: int = 0
    num_blocks: int = 1

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown arch {self.arch!r}, expected one of {ARCHS}")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.arch in ("logreg", "mlp") and self.input_dim < 1:
            raise ConfigError(f"{self.arch} requires input_dim >= 1")
        if self.arch == "mlp" and (not self.hidden or any(h < 1 for h in self.hidden)):
            raise ConfigError("mlp requires a nonempty tuple of positive hidden widths")
        if self.arch == "tiny_transformer":
            if self.vocab_size < 2 or self.seq_len < 1 or self.model_dim < 2 or self.ff_dim < 1:
                raise ConfigError("tiny_transformer requires vocab_size, seq_len, model_dim, ff_dim")
            if self.model_dim % 2 != 0:
                raise ConfigError("model_dim must be even (sinusoidal position pairs)")
            if self.num_blocks not in (1, 2):
                raise ConfigError("num_blocks must be 1 or 2")


@dataclass
class Batch:
    """Model inputs plus integer labels; inputs are float features or tokens."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.labels = np.asarray(self.labels)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise InvalidDimensionError("inputs and labels disagree on batch size")

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])


# ---------------------------------------------------------------------------
# layouts and initialization
#
# Each layout entry is (name, length, init_kind, fan_in) where init_kind is
# "weight" (normals scaled by 1/sqrt(fan_in)), "bias" (zeros), or "gain"
# (ones, for layer-norm scales).


def _logreg_layout(spec: ModelSpec):
    p, k = spec.input_dim, spec.num_classes
    return [("head.weight", p * k, "weight", p), ("head.bias", k, "bias", 0)]


def _mlp_layout(spec: ModelSpec):
    dims = [spec.input_dim, *spec.hidden, spec.num_classes]
    layout = []
    for i in range(len(dims) - 1):
        name = "head" if i == len(dims) - 2 else f"layer{i}"
        layout.append((f"{name}.weight", dims[i] * dims[i + 1], "weight", dims[i]))
        layout.append((f"{name}.bias", dims[i + 1], "bias", 0))
    return layout


def _transformer_layout(spec: ModelSpec):
    dm, dff = spec.model_dim, spec.ff_dim
    layout = [("embed.weight", spec.vocab_size * dm, "weight", dm)]
    for b in range(spec.num_blocks):
        p = f"block{b}"
        layout += [
            (f"{p}.ln1.gamma", dm, "gain", 0),
            (f"{p}.ln1.beta", dm, "bias", 0),
            (f"{p}.attn.wq", dm * dm, "weight", dm),
            (f"{p}.attn.bq", dm, "bias", 0),
            (f"{p}.attn.wk", dm * dm, "weight", dm),
            (f"{p}.attn.bk", dm, "bias", 0),
            (f"{p}.attn.wv", dm * dm, "weight", dm),
            (f"{p}.attn.bv", dm, "bias", 0),
            (f"{p}.attn.wo", dm * dm, "weight", dm),
            (f"{p}.attn.bo", dm, "bias", 0),
            (f"{p}.ln2.gamma", dm, "gain", 0),
            (f"{p}.ln2.beta", dm, "bias", 0),
            (f"{p}.ffn.w1", dm * dff, "weight", dm),
            (f"{p}.ffn.b1", dff, "bias", 0),
            (f"{p}.ffn.w2", dff * dm, "weight", dff),
            (f"{p}.ffn.b2", dm, "bias", 0),
        ]
    layout += [("head.weight", dm * spec.num_classes, "weight", dm),
               ("head.bias", spec.num_classes, "bias", 0)]
    return layout


def layout(spec: ModelSpec):
    return {"logreg": _logreg_layout, "mlp": _mlp_layout,
            "tiny_transformer": _transformer_layout}[spec.arch](spec)


def param_count(spec: ModelSpec) -> int:
    return sum(length for _, length, _, _ in layout(spec))


def build_partition(spec: ModelSpec) -> tuple[LayerSegment, ...]:
    segs, off = [], 0
    for name, length, _, _ in layout(spec):
        segs.append(LayerSegment(name, off, length))
        off += length
    return tuple(segs)


def init_params(spec: ModelSpec, seed: int) -> ParameterVector:
    """Deterministic init: weights ~ N(0, 1/fan_in), biases 0, LN gains 1.

    Layer i draws from sub-stream mix(seed, i), so layouts sharing a prefix
    initialize that prefix identically.
    """
    lay = layout(spec)
    values = np.empty(sum(length for _, length, _, _ in lay))
    off = 0
    for i, (name, length, kind, fan_in) in enumerate(lay):
        seg = values[off : off + length]
        if kind == "weight":
            seg[:] = SplitMix64(mix(seed, i)).normals(length) / np.sqrt(fan_in)
        elif kind == "gain":
            seg[:] = 1.0
        else:
            seg[:] = 0.0
        off += length
    return ParameterVector(values, build_partition(spec))


def reseed_head(spec: ModelSpec, params: ParameterVector, seed: int | None = None) -> ParameterVector:
    """Copy of params with the classification head freshly re-initialized."""
    seed = spec.head_init_seed if seed is None else seed
    out = params.copy()
    for i, (name, length, kind, fan_in) in enumerate(layout(spec)):
        if not name.startswith("head."):
            continue
        seg = out.segment(name)
        if kind == "weight":
            seg[:] = SplitMix64(mix(seed, i)).normals(length) / np.sqrt(fan_in)
        else:
            seg[:] = 0.0
    return out


def transplant_body(src: ParameterVector, dst_spec: ModelSpec, head_seed: int) -> ParameterVector:
    """Build params for dst_spec: body layers copied from src, head fresh.

    Used to attach a new classification head to checkpointed weights; every
    non-head layer must exist in src with the same length.
    """
    out = init_params(dst_spec, head_seed)
    out = reseed_head(dst_spec, out, head_seed)
    for seg in out.partition:
        if seg.name.startswith("head."):
            continue
        src_seg = src.segment(seg.name)
        if src_seg.shape[0] != seg.length:
            raise InvalidDimensionError(
                f"layer {seg.name} has length {src_seg.shape[0]} in source, {seg.length} in target")
        out.values[seg.offset : seg.offset + seg.length] = src_seg
    return out


# ---------------------------------------------------------------------------
# forward / backward


def _views(spec: ModelSpec, values: np.ndarray) -> dict:
    """Name -> reshaped view of the flat vector (weights as (fan_in, out))."""
    out, off = {}, 0
    shapes = _shapes(spec)
    for name, length, _, _ in layout(spec):
        out[name] = values[off : off + length].reshape(shapes[name])
        off += length
    return out


def _shapes(spec: ModelSpec) -> dict:
    if spec.arch == "logreg":
        return {"head.weight": (spec.input_dim, spec.num_classes), "head.bias": (spec.num_classes,)}
    if spec.arch == "mlp":
        dims = [spec.input_dim, *spec.hidden, spec.num_classes]
        shapes = {}
        for i in range(len(dims) - 1):
            name = "head" if i == len(dims) - 2 else f"layer{i}"
            shapes[f"{name}.weight"] = (dims[i], dims[i + 1])
            shapes[f"{name}.bias"] = (dims[i + 1],)
        return shapes
    dm, dff = spec.model_dim, spec.ff_dim
    shapes = {"embed.weight": (spec.vocab_size, dm)}
    for b in range(spec.num_blocks):
        p = f"block{b}"
        for nm in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{nm}"] = (dm, dm)
        for nm in ("bq", "bk", "bv", "bo"):
            shapes[f"{p}.attn.{nm}"] = (dm,)
        shapes[f"{p}.ln1.gamma"] = shapes[f"{p}.ln1.beta"] = (dm,)
        shapes[f"{p}.ln2.gamma"] = shapes[f"{p}.ln2.beta"] = (dm,)
        shapes[f"{p}.ffn.w1"] = (dm, dff)
        shapes[f"{p}.ffn.b1"] = (dff,)
        shapes[f"{p}.ffn.w2"] = (dff, dm)
        shapes[f"{p}.ffn.b2"] = (dm,)
    shapes["head.weight"] = (dm, spec.num_classes)
    shapes["head.bias"] = (spec.num_classes,)
    return shapes


def forward(spec: ModelSpec, values: np.ndarray, inputs: np.ndarray):
    """Returns (logits, cache); cache feeds the matching backward pass."""
    v = _views(spec, values)
    if spec.arch == "logreg":
        x = inputs.astype(values.dtype, copy=False)
        logits = x @ v["head.weight"] + v["head.bias"]
        return logits, (x,)
    if spec.arch == "mlp":
        x = inputs.astype(values.dtype, copy=False)
        acts = [x]
        n_hidden = len(spec.hidden)
        for i in range(n_hidden):
            x = np.tanh(x @ v[f"layer{i}.weight"] + v[f"layer{i}.bias"])
            acts.append(x)
        logits = x @ v["head.weight"] + v["head.bias"]
        return logits, (acts,)
    from .transformer import transformer_forward

    return transformer_forward(spec, v, inputs)


def backward(spec: ModelSpec, values: np.ndarray, cache, dlogits: np.ndarray) -> np.ndarray:
    """Exact gradient of the scalar loss w.r.t. the flat parameter vector."""
    v = _views(spec, values)
    grad = np.zeros_like(values)
    gv = _views(spec, grad)
    if spec.arch == "logreg":
        (x,) = cache
        gv["head.weight"] += x.T @ dlogits
        gv["head.bias"] += dlogits.sum(axis=0)
        return grad
    if spec.arch == "mlp":
        (acts,) = cache
        gv["head.weight"] += acts[-1].T @ dlogits
        gv["head.bias"] += dlogits.sum(axis=0)
        dx = dlogits @ v["head.weight"].T
        for i in range(len(spec.hidden) - 1, -1, -1):
            dpre = dx * (1.0 - acts[i + 1] ** 2)
            gv[f"layer{i}.weight"] += acts[i].T @ dpre
            gv[f"layer{i}.bias"] += dpre.sum(axis=0)
            dx = dpre @ v[f"layer{i}.weight"].T
        return grad
    from .transformer import transformer_backward

    transformer_backward(spec, v, gv, cache, dlogits)
    return grad


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean CE loss, its gradient w.r.t. logits, and argmax accuracy.

    Argmax ties resolve to the lowest class index.
    """
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    logp = z - np.log(denom)
    n = logits.shape[0]
    rows = np.arange(n)
    loss = float(-logp[rows, labels].mean())
    dlogits = ez / denom
    dlogits[rows, labels] -= 1.0
    dlogits /= n
    acc = float((logits.argmax(axis=1) == labels).mean())
    return loss, dlogits.astype(logits.dtype, copy=False), acc


def loss_and_grad(spec: ModelSpec, params: ParameterVector, batch: Batch):
    """(mean CE loss, exact flat gradient, argmax accuracy) on one batch."""
    logits, cache = forward(spec, params.values, batch.inputs)
    if not np.all(np.isfinite(logits)):
        bad = int(np.count_nonzero(~np.isfinite(logits)))
        raise NumericError(f"{bad} non-finite logits in forward pass (arch={spec.arch})")
    loss, dlogits, acc = softmax_cross_entropy(logits, batch.labels)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss (arch={spec.arch})")
    return loss, backward(spec, params.values, cache, dlogits), acc


def evaluate(spec: ModelSpec, params: ParameterVector, batch: Batch):
    """(mean CE loss, argmax accuracy) without computing gradients."""
    logits, _ = forward(spec, params.values, batch.inputs)
    if not np.all(np.isfinite(logits)):
        raise NumericError(f"non-finite logits in forward pass (arch={spec.arch})")
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(len(batch.labels)), batch.labels].mean())
    acc = float((logits.argmax(axis=1) == batch.labels).mean())
    return loss, acc


def margin_loss(logits: np.ndarray, labels: np.ndarray, gamma: float = 0.0) -> float:
    """Fraction of samples whose true-class logit fails to beat every other
    logit by more than gamma; ties count as errors, gamma=0 gives 1 - accuracy.
    """
    if gamma < 0:
        raise ConfigError("gamma must be >= 0")
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    rows = np.arange(logits.shape[0])
    true = logits[rows, labels]
    rest = logits.copy()
    rest[rows, labels] = -np.inf
    best_other = rest.max(axis=1)
    return float((true <= gamma + best_other).mean())
