"""Experiment configuration documents: strict JSON parsing and round-trips.

Every section is validated before any computation starts; unknown keys are
rejected with the offending JSON path so typos cannot silently change an
experiment.  ``to_dict`` emits a canonical document (defaults filled in),
and parse -> serialize -> parse is idempotent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .measure import D90Config
from .nn import ModelSpec
from .subspace import TrainConfig
from .tasks import TaskSpec, TsvSchema

_MODEL_KEYS = {"arch", "num_classes", "head_init_seed", "input_dim", "hidden",
               "vocab_size", "seq_len", "model_dim", "ff_dim", "num_blocks"}
_TASK_KEYS = {"kind", "seed", "num_train", "num_eval", "num_classes", "name", "family_seed",
              "input_dim", "latent_dim", "noise", "vocab_size", "seq_len", "rule_order",
              "rule_kind", "rule_margin", "family_aligned", "tsv_path", "schema"}
_SCHEMA_KEYS = {"features", "label", "text_dim", "train_fraction"}
_TRAIN_KEYS = {"steps", "batch_size", "learning_rate", "optimizer", "eval_every", "seed", "dtype"}
_D90_KEYS = {"d_grid", "lr_grid", "threshold_ratio", "search", "d_min", "d_max"}
_PRETRAIN_KEYS = {"task", "train", "checkpoints"}
_TOP_KEYS = {"seed", "output_dir", "method", "projection", "model", "task", "tasks",
             "train", "d90", "d", "init_seed", "pretrain", "widths", "save_encoding"}


def _reject_unknown(doc: dict, allowed: set, path: str) -> None:
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ConfigError(f"{path}: unknown keys {extra}")


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return doc[key]


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_model(doc: dict, path: str = "model") -> ModelSpec:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(doc, _MODEL_KEYS, path)
    kwargs = {"arch": _as_str(_require(doc, "arch", path), f"{path}.arch"),
              "num_classes": _as_int(_require(doc, "num_classes", path), f"{path}.num_classes")}
    for key in ("head_init_seed", "input_dim", "vocab_size", "seq_len", "model_dim",
                "ff_dim", "num_blocks"):
        if key in doc:
            kwargs[key] = _as_int(doc[key], f"{path}.{key}")
    if "hidden" in doc:
        if not isinstance(doc["hidden"], list):
            raise ConfigError(f"{path}.hidden: expected a list of widths")
        kwargs["hidden"] = tuple(_as_int(h, f"{path}.hidden[{i}]") for i, h in enumerate(doc["hidden"]))
    return _wrap(path, ModelSpec, **kwargs)


@dataclass(frozen=True)
class TsvTask:
    path: str
    schema: TsvSchema
    seed: int
    name: str = ""


def parse_task(doc: dict, path: str = "task"):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(doc, _TASK_KEYS, path)
    kind = _as_str(_require(doc, "kind", path), f"{path}.kind")
    if kind == "tsv":
        schema_doc = _require(doc, "schema", path)
        _reject_unknown(schema_doc, _SCHEMA_KEYS, f"{path}.schema")
        feats = _require(schema_doc, "features", f"{path}.schema")
        if not isinstance(feats, list):
            raise ConfigError(f"{path}.schema.features: expected a list")
        features = tuple((_as_str(f[0], f"{path}.schema.features[{i}][0]"),
                          _as_str(f[1], f"{path}.schema.features[{i}][1]"))
                         for i, f in enumerate(feats))
        kwargs = {"features": features,
                  "label": _as_str(_require(schema_doc, "label", f"{path}.schema"), f"{path}.schema.label")}
        if "text_dim" in schema_doc:
            kwargs["text_dim"] = _as_int(schema_doc["text_dim"], f"{path}.schema.text_dim")
        if "train_fraction" in schema_doc:
            kwargs["train_fraction"] = _as_num(schema_doc["train_fraction"], f"{path}.schema.train_fraction")
        schema = _wrap(f"{path}.schema", TsvSchema, **kwargs)
        return TsvTask(path=_as_str(_require(doc, "tsv_path", path), f"{path}.tsv_path"),
                       schema=schema,
                       seed=_as_int(doc.get("seed", 0), f"{path}.seed"),
                       name=_as_str(doc.get("name", ""), f"{path}.name"))
    kwargs = {"kind": kind,
              "seed": _as_int(_require(doc, "seed", path), f"{path}.seed"),
              "num_train": _as_int(_require(doc, "num_train", path), f"{path}.num_train"),
              "num_eval": _as_int(_require(doc, "num_eval", path), f"{path}.num_eval")}
    for key in ("num_classes", "family_seed", "input_dim", "latent_dim",
                "vocab_size", "seq_len", "rule_order", "rule_margin"):
        if key in doc and doc[key] is not None:
            kwargs[key] = _as_int(doc[key], f"{path}.{key}")
    if "noise" in doc:
        kwargs["noise"] = _as_num(doc["noise"], f"{path}.noise")
    if "name" in doc:
        kwargs["name"] = _as_str(doc["name"], f"{path}.name")
    if "rule_kind" in doc:
        kwargs["rule_kind"] = _as_str(doc["rule_kind"], f"{path}.rule_kind")
    if "family_aligned" in doc:
        if not isinstance(doc["family_aligned"], bool):
            raise ConfigError(f"{path}.family_aligned: expected a boolean")
        kwargs["family_aligned"] = doc["family_aligned"]
    return _wrap(path, TaskSpec, **kwargs)


def parse_train(doc: dict, path: str = "train") -> TrainConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(doc, _TRAIN_KEYS, path)
    kwargs = {"steps": _as_int(_require(doc, "steps", path), f"{path}.steps"),
              "batch_size": _as_int(_require(doc, "batch_size", path), f"{path}.batch_size"),
              "learning_rate": _as_num(_require(doc, "learning_rate", path), f"{path}.learning_rate")}
    if "optimizer" in doc:
        kwargs["optimizer"] = _as_str(doc["optimizer"], f"{path}.optimizer")
    if "eval_every" in doc:
        kwargs["eval_every"] = _as_int(doc["eval_every"], f"{path}.eval_every")
    if "seed" in doc:
        kwargs["seed"] = _as_int(doc["seed"], f"{path}.seed")
    if "dtype" in doc:
        kwargs["dtype"] = _as_str(doc["dtype"], f"{path}.dtype")
    return _wrap(path, TrainConfig, **kwargs)


def parse_d90(doc: dict, path: str = "d90") -> D90Config:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    _reject_unknown(doc, _D90_KEYS, path)
    kwargs = {}
    if "d_grid" in doc:
        if not isinstance(doc["d_grid"], list):
            raise ConfigError(f"{path}.d_grid: expected a list")
        kwargs["d_grid"] = tuple(_as_int(v, f"{path}.d_grid[{i}]") for i, v in enumerate(doc["d_grid"]))
    if "lr_grid" in doc:
        if not isinstance(doc["lr_grid"], list):
            raise ConfigError(f"{path}.lr_grid: expected a list")
        kwargs["lr_grid"] = tuple(_as_num(v, f"{path}.lr_grid[{i}]") for i, v in enumerate(doc["lr_grid"]))
    if "threshold_ratio" in doc:
        kwargs["threshold_ratio"] = _as_num(doc["threshold_ratio"], f"{path}.threshold_ratio")
    if "search" in doc:
        kwargs["search"] = _as_str(doc["search"], f"{path}.search")
    for key in ("d_min", "d_max"):
        if key in doc and doc[key] is not None:
            kwargs[key] = _as_int(doc[key], f"{path}.{key}")
    return _wrap(path, D90Config, **kwargs)


@dataclass(frozen=True)
class PretrainConfig:
    task: object
    train: TrainConfig
    checkpoints: tuple


@dataclass
class ExperimentConfig:
    seed: int
    model: ModelSpec
    train: TrainConfig | None = None
    method: str = "did"
    projection: str = "fastfood"
    task: object | None = None
    tasks: tuple = ()
    d90: D90Config = field(default_factory=D90Config)
    d: int | None = None
    init_seed: int = 0
    pretrain: PretrainConfig | None = None
    widths: tuple = ()
    output_dir: str | None = None
    save_encoding: bool = False


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "top level")
    cfg = ExperimentConfig(
        seed=_as_int(_require(doc, "seed", "top level"), "seed"),
        model=parse_model(_require(doc, "model", "top level")),
    )
    if "method" in doc:
        cfg.method = _as_str(doc["method"], "method")
        if cfg.method not in ("did", "said", "full"):
            raise ConfigError("method: must be 'did', 'said', or 'full'")
    if "projection" in doc:
        cfg.projection = _as_str(doc["projection"], "projection")
        if cfg.projection not in ("fastfood", "dense"):
            raise ConfigError("projection: must be 'fastfood' or 'dense'")
    if "task" in doc:
        cfg.task = parse_task(doc["task"])
    if "tasks" in doc:
        if not isinstance(doc["tasks"], list) or not doc["tasks"]:
            raise ConfigError("tasks: expected a nonempty list")
        cfg.tasks = tuple(parse_task(t, f"tasks[{i}]") for i, t in enumerate(doc["tasks"]))
    if "train" in doc:
        cfg.train = parse_train(doc["train"])
    if "d90" in doc:
        cfg.d90 = parse_d90(doc["d90"])
    if "d" in doc:
        cfg.d = _as_int(doc["d"], "d")
    if "init_seed" in doc:
        cfg.init_seed = _as_int(doc["init_seed"], "init_seed")
    if "output_dir" in doc:
        cfg.output_dir = _as_str(doc["output_dir"], "output_dir")
    if "save_encoding" in doc:
        if not isinstance(doc["save_encoding"], bool):
            raise ConfigError("save_encoding: expected a boolean")
        cfg.save_encoding = doc["save_encoding"]
    if "widths" in doc:
        if not isinstance(doc["widths"], list) or not doc["widths"]:
            raise ConfigError("widths: expected a nonempty list")
        cfg.widths = tuple(_as_int(w, f"widths[{i}]") for i, w in enumerate(doc["widths"]))
    if "pretrain" in doc:
        pre = doc["pretrain"]
        if not isinstance(pre, dict):
            raise ConfigError("pretrain: expected an object")
        _reject_unknown(pre, _PRETRAIN_KEYS, "pretrain")
        ck = _require(pre, "checkpoints", "pretrain")
        if not isinstance(ck, list) or not ck:
            raise ConfigError("pretrain.checkpoints: expected a nonempty list")
        cfg.pretrain = PretrainConfig(
            task=parse_task(_require(pre, "task", "pretrain"), "pretrain.task"),
            train=parse_train(_require(pre, "train", "pretrain"), "pretrain.train"),
            checkpoints=tuple(_as_int(s, f"pretrain.checkpoints[{i}]") for i, s in enumerate(ck)),
        )
    return cfg


def _task_to_dict(task) -> dict:
    if isinstance(task, TsvTask):
        return {"kind": "tsv", "tsv_path": task.path, "seed": task.seed, "name": task.name,
                "schema": {"features": [list(f) for f in task.schema.features],
                           "label": task.schema.label, "text_dim": task.schema.text_dim,
                           "train_fraction": task.schema.train_fraction}}
    return {"kind": task.kind, "seed": task.seed, "num_train": task.num_train,
            "num_eval": task.num_eval, "num_classes": task.num_classes, "name": task.name,
            "family_seed": task.family_seed, "input_dim": task.input_dim,
            "latent_dim": task.latent_dim, "noise": task.noise, "vocab_size": task.vocab_size,
            "seq_len": task.seq_len, "rule_order": task.rule_order,
            "rule_kind": task.rule_kind, "rule_margin": task.rule_margin,
            "family_aligned": task.family_aligned}


def _model_to_dict(model: ModelSpec) -> dict:
    return {"arch": model.arch, "num_classes": model.num_classes,
            "head_init_seed": model.head_init_seed, "input_dim": model.input_dim,
            "hidden": list(model.hidden), "vocab_size": model.vocab_size,
            "seq_len": model.seq_len, "model_dim": model.model_dim, "ff_dim": model.ff_dim,
            "num_blocks": model.num_blocks}


def _train_to_dict(train: TrainConfig) -> dict:
    return {"steps": train.steps, "batch_size": train.batch_size,
            "learning_rate": train.learning_rate, "optimizer": train.optimizer,
            "eval_every": train.eval_every, "seed": train.seed, "dtype": train.dtype}


def to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical (defaults-filled) document; parse(to_dict(cfg)) == cfg."""
    doc = {"seed": cfg.seed, "method": cfg.method, "projection": cfg.projection,
           "model": _model_to_dict(cfg.model), "init_seed": cfg.init_seed,
           "save_encoding": cfg.save_encoding,
           "d90": {"d_grid": list(cfg.d90.d_grid), "lr_grid": list(cfg.d90.lr_grid),
                   "threshold_ratio": cfg.d90.threshold_ratio, "search": cfg.d90.search,
                   "d_min": cfg.d90.d_min, "d_max": cfg.d90.d_max}}
    if cfg.train is not None:
        doc["train"] = _train_to_dict(cfg.train)
    if cfg.task is not None:
        doc["task"] = _task_to_dict(cfg.task)
    if cfg.tasks:
        doc["tasks"] = [_task_to_dict(t) for t in cfg.tasks]
    if cfg.d is not None:
        doc["d"] = cfg.d
    if cfg.output_dir is not None:
        doc["output_dir"] = cfg.output_dir
    if cfg.widths:
        doc["widths"] = list(cfg.widths)
    if cfg.pretrain is not None:
        doc["pretrain"] = {"task": _task_to_dict(cfg.pretrain.task),
                           "train": _train_to_dict(cfg.pretrain.train),
                           "checkpoints": list(cfg.pretrain.checkpoints)}
    return doc


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON config file.

    JSON syntax errors surface as ConfigError with line/column positions.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc)
