"""Reparameterized trainers: full-space, direct subspace, and structure-aware.

The subspace methods optimize a small intrinsic vector that is pushed into
parameter space through a frozen seeded projection:

* ``did`` — effective params = theta0 + P(theta_d); the whole budget d goes
  into the projection input.
* ``said`` — per layer i, effective = theta0_i + lambda_i * P(theta_{d-m})_i;
  m of the d budget pays for one learned scale per layer, so the projection
  input has d - m coordinates and the reported budget still counts d.

At initialization theta_d = 0 (and lambda = 1), so the effective parameters
equal theta0 exactly and training starts from the provided model.  theta0 is
never mutated.  ``full`` training with the identical step loop provides the
baseline that d90 thresholds are measured against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidDimensionError, NumericError
from .nn import Batch, ModelSpec, ParameterVector, evaluate, loss_and_grad
from .projection import apply_adjoint, apply_projection, make_projection
from .rng import SplitMix64, mix
from .tasks import Dataset, check_model_compat

_T_PROJ = 0x70
_T_BATCH = 0x71

METHODS = ("did", "said")


@dataclass(frozen=True)
class TrainConfig:
    steps: int
    batch_size: int
    learning_rate: float
    optimizer: str = "adam"
    eval_every: int = 50
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.eval_every < 1:
            raise ConfigError("steps must be >= 0, batch_size and eval_every positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")

    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class RunRecord:
    """One training run's configuration and best-eval outcome.

    ``intrinsic`` holds the trainable vector at the best-eval step (for the
    subspace methods: [theta_d] or [theta_{d-m}, lambda]); together with
    (proj_seed, d, method) and theta0 it reconstructs the reported model.
    """

    task: str
    model: str
    method: str
    d: int
    learning_rate: float
    seed: int
    steps: int
    train_acc: float
    eval_acc: float
    best_step: int
    status: str = "ok"
    proj_seed: int | None = None
    intrinsic: np.ndarray | None = None


@dataclass
class SubspaceModel:
    """Frozen theta0 plus projection plus the trainable intrinsic state."""

    theta0: ParameterVector
    proj: object
    method: str
    theta_d: np.ndarray
    lam: np.ndarray | None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.proj.D != self.theta0.dim:
            raise InvalidDimensionError(
                f"projection codomain {self.proj.D} != parameter count {self.theta0.dim}")
        if self.method == "said":
            if self.lam is None or len(self.lam) != self.theta0.num_layers:
                raise InvalidDimensionError("said needs one lambda per layer")
        elif self.lam is not None:
            raise InvalidDimensionError("did carries no lambda vector")

    @property
    def budget(self) -> int:
        extra = self.theta0.num_layers if self.method == "said" else 0
        return int(self.theta_d.shape[0]) + extra


def make_subspace_model(theta0: ParameterVector, proj, method: str) -> SubspaceModel:
    dtype = theta0.values.dtype
    lam = np.ones(theta0.num_layers, dtype=dtype) if method == "said" else None
    return SubspaceModel(theta0, proj, method, np.zeros(proj.d, dtype=dtype), lam)


def _expand_lambda(sm: SubspaceModel) -> np.ndarray:
    return np.repeat(sm.lam, sm.theta0.segment_lengths())


def effective_params(sm: SubspaceModel) -> np.ndarray:
    """theta0 + P(theta_d), with per-layer lambda scaling under said."""
    p = apply_projection(sm.proj, sm.theta_d)
    if sm.method == "said":
        p *= _expand_lambda(sm)
    return sm.theta0.values + p


def intrinsic_grad(sm: SubspaceModel, g_D: np.ndarray):
    """Pull a full-space gradient back to (theta_d, lambda) coordinates.

    did: (P^T g, None).  said: theta_d gets P^T(lambda ⊙ g); lambda_i is the
    inner product of P(theta_d) and g over layer i's segment.
    """
    if g_D.shape != (sm.theta0.dim,):
        raise InvalidDimensionError(f"gradient length {g_D.shape} != ({sm.theta0.dim},)")
    if sm.method == "did":
        return apply_adjoint(sm.proj, g_D), None
    g_theta = apply_adjoint(sm.proj, _expand_lambda(sm) * g_D)
    p = apply_projection(sm.proj, sm.theta_d)
    offsets = np.array([seg.offset for seg in sm.theta0.partition], dtype=np.int64)
    g_lam = np.add.reduceat(p * g_D, offsets).astype(g_D.dtype, copy=False)
    return g_theta, g_lam


# ---------------------------------------------------------------------------
# optimizers over the trainable coordinates


class Sgd:
    def __init__(self, dim: int, lr: float, dtype):
        self.lr = dtype(lr)

    def step(self, x: np.ndarray, g: np.ndarray) -> None:
        x -= self.lr * g


class Adam:
    def __init__(self, dim: int, lr: float, dtype, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(dim, dtype=dtype)
        self.v = np.zeros(dim, dtype=dtype)
        self.t = 0

    def step(self, x: np.ndarray, g: np.ndarray) -> None:
        self.t += 1
        self.m += (1.0 - self.beta1) * (g - self.m)
        self.v += (1.0 - self.beta2) * (g * g - self.v)
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        x -= np.asarray(self.lr * mhat / (np.sqrt(vhat) + self.eps), dtype=x.dtype)


def _make_optimizer(kind: str, dim: int, lr: float, dtype):
    return Adam(dim, lr, dtype) if kind == "adam" else Sgd(dim, lr, dtype)


# ---------------------------------------------------------------------------
# the shared step loop


def _cast_batch(batch: Batch, dtype) -> Batch:
    if np.issubdtype(batch.inputs.dtype, np.floating):
        return Batch(batch.inputs.astype(dtype), batch.labels)
    return batch


class _EpochBatches:
    """Deterministic shuffled-epoch batches from a splitmix64 stream."""

    def __init__(self, batch: Batch, batch_size: int, stream: SplitMix64):
        self.batch = batch
        self.size = min(batch_size, batch.size)
        self.stream = stream
        self._order = None
        self._pos = 0

    def next(self) -> Batch:
        if self.size == self.batch.size:
            return self.batch
        if self._order is None or self._pos >= self.batch.size:
            self._order = self.stream.permutation(self.batch.size)
            self._pos = 0
        idx = self._order[self._pos : self._pos + self.size]
        self._pos += self.size
        return Batch(self.batch.inputs[idx], self.batch.labels[idx])


def _train(spec: ModelSpec, dataset: Dataset, cfg: TrainConfig, adapter,
           checkpoint_steps=(), checkpoint_cb=None) -> dict:
    dtype = cfg.np_dtype()
    train_b = _cast_batch(dataset.train, dtype)
    eval_b = _cast_batch(dataset.eval, dtype)
    sampler = _EpochBatches(train_b, cfg.batch_size, SplitMix64(mix(cfg.seed, _T_BATCH)))
    x = adapter.init_x()
    opt = _make_optimizer(cfg.optimizer, len(x), cfg.learning_rate, dtype)

    best = {"eval_acc": -1.0, "train_acc": 0.0, "step": 0, "x": x.copy()}
    status = "ok"
    checkpoint_steps = set(checkpoint_steps)

    def _eval_point(step: int) -> bool:
        eff = ParameterVector(adapter.effective(x), adapter.partition)
        try:
            _, eval_acc = evaluate(spec, eff, eval_b)
            _, train_acc = evaluate(spec, eff, train_b)
        except NumericError:
            return False
        if eval_acc > best["eval_acc"]:
            best.update(eval_acc=eval_acc, train_acc=train_acc, step=step, x=x.copy())
        return True

    if checkpoint_cb and 0 in checkpoint_steps:
        checkpoint_cb(0, adapter.effective(x).copy())
    if not _eval_point(0):
        status = "diverged"
    step = 0
    while status == "ok" and step < cfg.steps:
        step += 1
        batch = sampler.next()
        try:
            _, g_D, _ = loss_and_grad(spec, ParameterVector(adapter.effective(x), adapter.partition), batch)
            opt.step(x, adapter.pullback(g_D))
        except NumericError:
            status = "diverged"
            break
        if checkpoint_cb and step in checkpoint_steps:
            checkpoint_cb(step, adapter.effective(x).copy())
        if step % cfg.eval_every == 0 or step == cfg.steps:
            if not _eval_point(step):
                status = "diverged"
    if best["eval_acc"] < 0.0:
        best.update(eval_acc=0.0, train_acc=0.0)
    return {"best": best, "status": status, "steps_run": step}


class _FullAdapter:
    def __init__(self, theta0: ParameterVector, dtype):
        self._x0 = theta0.values.astype(dtype)
        self.partition = theta0.partition

    def init_x(self):
        return self._x0.copy()

    def effective(self, x):
        return x

    def pullback(self, g_D):
        return g_D


class _SubspaceAdapter:
    def __init__(self, theta0: ParameterVector, proj, method: str, dtype, lambda_frozen: bool):
        self.sm = make_subspace_model(theta0.astype(dtype), proj, method)
        self.partition = theta0.partition
        self.method = method
        self.lambda_frozen = lambda_frozen
        self._d_sub = proj.d

    def init_x(self):
        if self.method == "said":
            return np.concatenate([self.sm.theta_d, self.sm.lam])
        return self.sm.theta_d.copy()

    def _sync(self, x):
        self.sm.theta_d = x[: self._d_sub]
        if self.method == "said":
            self.sm.lam = x[self._d_sub :]

    def effective(self, x):
        self._sync(x)
        return effective_params(self.sm)

    def pullback(self, g_D):
        g_theta, g_lam = intrinsic_grad(self.sm, g_D)
        if self.method == "did":
            return g_theta
        if self.lambda_frozen:
            g_lam = np.zeros_like(g_lam)
        return np.concatenate([g_theta, g_lam])


def train_full(spec: ModelSpec, theta0: ParameterVector, dataset: Dataset, cfg: TrainConfig,
               checkpoint_steps=(), checkpoint_cb=None) -> RunRecord:
    """Train all D parameters; the baseline that defines d90 thresholds."""
    check_model_compat(spec, dataset)
    out = _train(spec, dataset, cfg, _FullAdapter(theta0, cfg.np_dtype()),
                 checkpoint_steps, checkpoint_cb)
    best = out["best"]
    return RunRecord(task=dataset.spec.label, model=model_label(spec), method="full",
                     d=theta0.dim, learning_rate=cfg.learning_rate, seed=cfg.seed,
                     steps=out["steps_run"], train_acc=best["train_acc"],
                     eval_acc=best["eval_acc"], best_step=best["step"], status=out["status"])


def train_subspace(spec: ModelSpec, theta0: ParameterVector, dataset: Dataset, method: str,
                   d: int, cfg: TrainConfig, proj_kind: str = "fastfood",
                   lambda_frozen: bool = False) -> RunRecord:
    """Train d intrinsic coordinates against frozen theta0 and projection.

    The run is fully determined by cfg.seed: the projection seed and the
    batch order both derive from it.
    """
    check_model_compat(spec, dataset)
    m = theta0.num_layers
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}")
    if method == "said" and d <= m:
        raise ConfigError(f"said budget d={d} must exceed the layer count m={m}")
    if d < 1:
        raise ConfigError("d must be >= 1")
    d_sub = d - m if method == "said" else d
    proj_seed = mix(cfg.seed, _T_PROJ)
    proj = make_projection(proj_kind, proj_seed, d_sub, theta0.dim)
    adapter = _SubspaceAdapter(theta0, proj, method, cfg.np_dtype(), lambda_frozen)
    out = _train(spec, dataset, cfg, adapter)
    best = out["best"]
    return RunRecord(task=dataset.spec.label, model=model_label(spec), method=method, d=d,
                     learning_rate=cfg.learning_rate, seed=cfg.seed, steps=out["steps_run"],
                     train_acc=best["train_acc"], eval_acc=best["eval_acc"],
                     best_step=best["step"], status=out["status"], proj_seed=proj_seed,
                     intrinsic=best["x"].copy())


def model_label(spec: ModelSpec) -> str:
    if spec.arch == "logreg":
        return f"logreg({spec.input_dim}-{spec.num_classes})"
    if spec.arch == "mlp":
        dims = "-".join(str(h) for h in (spec.input_dim, *spec.hidden, spec.num_classes))
        return f"mlp({dims})"
    return (f"tiny_transformer(dm={spec.model_dim},ff={spec.ff_dim},L={spec.seq_len},"
            f"V={spec.vocab_size},blocks={spec.num_blocks},K={spec.num_classes})")
