"""Measurement protocols: d90 search, trajectory and width sweeps, bounds.

d90 is the smallest probed subspace budget whose best-over-learning-rates
eval accuracy reaches threshold_ratio (default 0.9) times the full-parameter
baseline's best eval accuracy.  The search runs over a finite sorted grid,
either exhaustively or by binary search (which assumes the pass/fail pattern
is monotone in d and flags probed violations).  NOT_FOUND (None) is a value,
not an error: it means even the largest probed d failed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .errors import BaselineDegenerateError, ConfigError, IdimError, UndefinedGapError
from .nn import ModelSpec, ParameterVector, init_params, transplant_body
from .subspace import RunRecord, TrainConfig, model_label, train_full, train_subspace
from .tasks import Dataset, TaskSpec, generate
from .rng import mix

_T_FULL = 0          # reserved d-slot for the full baseline's run seeds
_T_HEAD = 0x80
_T_CELL = 0x81
_T_PRETRAIN = 0x82

SEARCH_MODES = ("binary", "exhaustive")


def default_d_grid(lo: int = 8, hi: int = 8192, points: int = 16) -> tuple[int, ...]:
    """Log-spaced integer grid, deduplicated, strictly increasing."""
    raw = np.exp(np.linspace(math.log(lo), math.log(hi), points))
    return tuple(sorted(set(int(round(v)) for v in raw)))


@dataclass(frozen=True)
class D90Config:
    d_grid: tuple = field(default_factory=default_d_grid)
    lr_grid: tuple = (3e-2, 1e-2, 3e-3, 1e-3)
    threshold_ratio: float = 0.9
    search: str = "binary"
    d_min: int | None = None
    d_max: int | None = None

    def __post_init__(self):
        grid = tuple(self.d_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("d_grid must be nonempty and strictly increasing")
        if grid[0] < 1:
            raise ConfigError("d_grid values must be >= 1")
        if not self.lr_grid or any(lr <= 0 for lr in self.lr_grid):
            raise ConfigError("lr_grid must be nonempty with positive rates")
        if not 0.0 <= self.threshold_ratio <= 1.0:
            raise ConfigError("threshold_ratio must be in [0, 1]")
        if self.search not in SEARCH_MODES:
            raise ConfigError(f"search must be one of {SEARCH_MODES}")
        object.__setattr__(self, "d_grid", grid)
        object.__setattr__(self, "lr_grid", tuple(self.lr_grid))

    def effective_grid(self) -> tuple:
        lo = self.d_min if self.d_min is not None else self.d_grid[0]
        hi = self.d_max if self.d_max is not None else self.d_grid[-1]
        grid = tuple(d for d in self.d_grid if lo <= d <= hi)
        if not grid:
            raise ConfigError(f"no grid points inside [{lo}, {hi}]")
        return grid


@dataclass
class D90Result:
    full_metric: float
    threshold: float
    d90: int | None
    trials: list
    probed: dict
    monotonicity_violated: bool
    majority_acc: float
    search: str
    method: str
    grid: tuple

    def best_record_at(self, d: int) -> RunRecord | None:
        cand = [r for r in self.trials if r.method != "full" and r.d == d]
        return max(cand, key=lambda r: r.eval_acc) if cand else None


def search_smallest_passing(grid, probe, threshold: float, mode: str = "binary"):
    """Smallest grid value whose probed metric is >= threshold.

    Returns (value_or_None, probed_metrics, monotonicity_violated).  Binary
    search probes O(log n) points and is exact when pass/fail is monotone;
    exhaustive probes everything and is exact regardless.  A metric exactly
    equal to the threshold passes.
    """
    grid = tuple(grid)
    if mode not in SEARCH_MODES:
        raise ConfigError(f"search must be one of {SEARCH_MODES}")
    probed: dict[int, float] = {}

    def metric(i: int) -> float:
        d = grid[i]
        if d not in probed:
            probed[d] = float(probe(d))
        return probed[d]

    if mode == "exhaustive":
        for i in range(len(grid)):
            metric(i)
        passing = [d for d in grid if probed[d] >= threshold]
        found = min(passing) if passing else None
    else:
        lo, hi, ans = 0, len(grid) - 1, None
        while lo <= hi:
            mid = (lo + hi) // 2
            if metric(mid) >= threshold:
                ans = mid
                hi = mid - 1
            else:
                lo = mid + 1
        found = grid[ans] if ans is not None else None
    ds = sorted(probed)
    flags = [probed[d] >= threshold for d in ds]
    violated = any(flags[i] and not flags[j] for i in range(len(ds)) for j in range(i + 1, len(ds)))
    return found, probed, violated


def majority_class_accuracy(labels: np.ndarray) -> float:
    _, counts = np.unique(labels, return_counts=True)
    return float(counts.max() / labels.shape[0])


def find_d90(spec: ModelSpec, theta0: ParameterVector, dataset: Dataset, method: str,
             cfg: D90Config, train_cfg: TrainConfig, proj_kind: str = "fastfood",
             threads: int = 1) -> D90Result:
    """Full d90 measurement: baseline over the lr grid, then grid search in d.

    One full baseline is trained per call and reused across all d probes.
    Run seeds derive from (train_cfg.seed, d, lr index) so identical calls
    reproduce identical trials; threading over the lr grid cannot change any
    output, only wall time.  For said, grid points d <= m (the layer count)
    cannot host the method and are skipped.
    """
    grid = cfg.effective_grid()
    if method == "said":
        m = theta0.num_layers
        grid = tuple(d for d in grid if d > m)
        if not grid:
            raise ConfigError(f"every grid point is <= layer count m={m}; said needs d > m")
    trials: list[RunRecord] = []

    def run_cells(d_slot: int, train_one):
        def cell(i):
            cell_cfg = replace(train_cfg, learning_rate=cfg.lr_grid[i],
                               seed=mix(mix(train_cfg.seed, d_slot), i))
            return train_one(cell_cfg)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=min(threads, len(cfg.lr_grid))) as ex:
                recs = list(ex.map(cell, range(len(cfg.lr_grid))))
        else:
            recs = [cell(i) for i in range(len(cfg.lr_grid))]
        trials.extend(recs)
        return max(r.eval_acc for r in recs)

    full_metric = run_cells(_T_FULL, lambda c: train_full(spec, theta0, dataset, c))
    majority = majority_class_accuracy(dataset.eval.labels)
    if full_metric <= majority:
        raise BaselineDegenerateError(
            f"full baseline eval accuracy {full_metric:.4f} does not beat "
            f"majority-class accuracy {majority:.4f}")
    threshold = cfg.threshold_ratio * full_metric

    def probe(d: int) -> float:
        return run_cells(d, lambda c: train_subspace(spec, theta0, dataset, method, d, c,
                                                     proj_kind=proj_kind))

    d90, probed, violated = search_smallest_passing(grid, probe, threshold, cfg.search)
    trials.sort(key=lambda r: (r.method != "full", r.d, r.learning_rate * -1.0))
    return D90Result(full_metric=full_metric, threshold=threshold, d90=d90, trials=trials,
                     probed=probed, monotonicity_violated=violated, majority_acc=majority,
                     search=cfg.search, method=method, grid=grid)


# ---------------------------------------------------------------------------
# scalar formulas


def relative_gap(acc_train: float, acc_eval: float) -> float:
    """(acc_train - acc_eval) / (1 - acc_eval); undefined at acc_eval = 1."""
    if not 0.0 <= acc_train <= 1.0 or not 0.0 <= acc_eval <= 1.0:
        raise ConfigError("accuracies must lie in [0, 1]")
    if acc_eval >= 1.0:
        raise UndefinedGapError("relative gap is undefined at eval accuracy 1.0")
    return (acc_train - acc_eval) / (1.0 - acc_eval)


def generalization_bound(d: int, m_samples: int, empirical_loss: float,
                         constant: float = 1.0) -> float:
    """empirical_loss + constant * sqrt(d / m_samples).

    The constant absorbs the quantization-state term of the underlying
    compression bound; report it next to the value, never fold it silently.
    """
    if d < 0 or m_samples < 1:
        raise ConfigError("need d >= 0 and m_samples >= 1")
    if constant <= 0:
        raise ConfigError("constant must be positive")
    return float(empirical_loss + constant * math.sqrt(d / m_samples))


def spearman(xs, ys) -> float:
    """Spearman rank correlation (ties get average ranks); nan if degenerate."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ConfigError("need two sequences of equal length >= 2")
    rho = stats.spearmanr(xs, ys).statistic
    return float(rho)


# ---------------------------------------------------------------------------
# experiment sweeps


@dataclass
class SweepCell:
    """One (checkpoint-or-width, task) measurement in a sweep."""

    key: int                 # checkpoint step or model width
    task: str
    dim_full: int
    d90: int | None
    full_metric: float | None
    threshold: float | None
    eval_acc: float | None   # best eval accuracy of the d90 run
    train_acc: float | None  # paired train accuracy of that run
    rel_gap: float | None
    error: str | None
    trials: list


@dataclass
class TrajectoryResult:
    checkpoint_steps: tuple
    cells: list
    pretrain_record: RunRecord
    provenance: dict


@dataclass
class WidthSweepResult:
    widths: tuple
    cells: list
    provenance: dict


def downstream_spec(pretrain_spec: ModelSpec, num_classes: int, head_seed: int) -> ModelSpec:
    return replace(pretrain_spec, num_classes=num_classes, head_init_seed=head_seed)


def _measure_cell(key: int, body: ParameterVector, pretrain_spec: ModelSpec, task: TaskSpec,
                  d90_cfg: D90Config, train_cfg: TrainConfig, method: str, cell_seed: int,
                  threads: int = 1) -> SweepCell:
    data = generate(task)
    spec = downstream_spec(pretrain_spec, data.num_classes, mix(cell_seed, _T_HEAD))
    theta0 = transplant_body(body, spec, mix(cell_seed, _T_HEAD))
    cell_train = replace(train_cfg, seed=cell_seed)
    try:
        res = find_d90(spec, theta0, data, method, d90_cfg, cell_train, threads=threads)
    except IdimError as exc:
        return SweepCell(key=key, task=task.label, dim_full=theta0.dim, d90=None,
                         full_metric=None, threshold=None, eval_acc=None, train_acc=None,
                         rel_gap=None, error=f"{type(exc).__name__}: {exc}", trials=[])
    eval_acc = train_acc = gap = None
    if res.d90 is not None:
        best = res.best_record_at(res.d90)
        if best is not None:
            eval_acc, train_acc = best.eval_acc, best.train_acc
            if eval_acc < 1.0:
                gap = relative_gap(train_acc, eval_acc)
    return SweepCell(key=key, task=task.label, dim_full=theta0.dim, d90=res.d90,
                     full_metric=res.full_metric, threshold=res.threshold, eval_acc=eval_acc,
                     train_acc=train_acc, rel_gap=gap, error=None, trials=res.trials)


def trajectory(pretrain_spec: ModelSpec, pretrain_task: TaskSpec, pretrain_cfg: TrainConfig,
               checkpoint_steps, tasks, d90_cfg: D90Config, train_cfg: TrainConfig,
               method: str = "said", threads: int = 1, checkpoint_dir: str | None = None) -> TrajectoryResult:
    """Pretrain from scratch, checkpoint, and measure d90 per (checkpoint, task).

    A failed cell (degenerate baseline, numeric trouble) is recorded with its
    error and does not abort the sweep.  Step 0 means the untrained init.
    """
    steps = tuple(sorted(set(int(s) for s in checkpoint_steps)))
    if not steps or any(s < 0 for s in steps):
        raise ConfigError("checkpoint steps must be nonnegative")
    if steps[-1] > pretrain_cfg.steps:
        raise ConfigError("checkpoint step beyond the pretraining budget")
    pre_data = generate(pretrain_task)
    theta_init = init_params(pretrain_spec, mix(pretrain_cfg.seed, _T_PRETRAIN))
    captured: dict[int, ParameterVector] = {}

    def grab(step: int, values: np.ndarray) -> None:
        captured[step] = ParameterVector(values.astype(np.float64), theta_init.partition)

    pre_rec = train_full(pretrain_spec, theta_init, pre_data, pretrain_cfg,
                         checkpoint_steps=steps, checkpoint_cb=grab)
    missing = [s for s in steps if s not in captured]
    if missing:
        raise ConfigError(f"pretraining never reached checkpoint steps {missing}")
    if checkpoint_dir is not None:
        from .checkpoint import save_checkpoint

        for s in steps:
            save_checkpoint(f"{checkpoint_dir}/checkpoint_{s:06d}.idck", captured[s],
                            pretrain_spec, {"pretrain_step": s, "seed": pretrain_cfg.seed})

    cells = []
    for si, step in enumerate(steps):
        for ti, task in enumerate(tasks):
            cell_seed = mix(mix(mix(train_cfg.seed, _T_CELL), si + 1), ti + 1)
            cells.append(_measure_cell(step, captured[step], pretrain_spec, task,
                                       d90_cfg, train_cfg, method, cell_seed, threads))
    return TrajectoryResult(checkpoint_steps=steps, cells=cells, pretrain_record=pre_rec,
                            provenance={"pretrain_task": pretrain_task.label,
                                        "method": method, "seed": train_cfg.seed})


def width_sweep(widths, pretrain_spec: ModelSpec, pretrain_task: TaskSpec,
                pretrain_cfg: TrainConfig, tasks, d90_cfg: D90Config, train_cfg: TrainConfig,
                method: str = "said", threads: int = 1) -> WidthSweepResult:
    """Identical pretraining protocol per width, then d90 per (width, task)."""
    widths = tuple(sorted(set(int(w) for w in widths)))
    if len(widths) < 1:
        raise ConfigError("need at least one width")
    pre_data = generate(pretrain_task)
    cells = []
    for wi, w in enumerate(widths):
        spec_w = replace(pretrain_spec, model_dim=w, ff_dim=2 * w)
        theta_init = init_params(spec_w, mix(mix(pretrain_cfg.seed, _T_PRETRAIN), wi))
        final: dict[int, ParameterVector] = {}

        def grab(step: int, values: np.ndarray, _part=theta_init.partition, _sink=final) -> None:
            _sink[step] = ParameterVector(values.astype(np.float64), _part)

        train_full(spec_w, theta_init, pre_data, pretrain_cfg,
                   checkpoint_steps=(pretrain_cfg.steps,), checkpoint_cb=grab)
        body = final[pretrain_cfg.steps]
        for ti, task in enumerate(tasks):
            cell_seed = mix(mix(mix(train_cfg.seed, _T_CELL), 0x100 + wi), ti + 1)
            cells.append(_measure_cell(w, body, spec_w, task, d90_cfg, train_cfg,
                                       method, cell_seed, threads))
    return WidthSweepResult(widths=widths, cells=cells,
                            provenance={"pretrain_task": pretrain_task.label,
                                        "method": method, "seed": train_cfg.seed})
