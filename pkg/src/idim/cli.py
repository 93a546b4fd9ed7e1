"""Command-line drivers: reproducible experiments in, CSV/JSON/SVG out.

Exit codes: 0 success, 1 experiment-level failure (degenerate baseline,
diverged single run), 2 usage or config errors.  All diagnostics are
one-line ``idim: error: <kind>: <message>`` on stderr.  Output files are
written to a temp file and atomically renamed, so a failed command never
leaves a partial CSV behind.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .checkpoint import save_task_encoding
from .errors import (BaselineDegenerateError, CapacityError, ConfigError, DataError,
                     IdimError, InvalidDimensionError, NumericError, UndefinedGapError)
from .fwht import fwht_inplace, is_power_of_two
from .measure import find_d90, trajectory, width_sweep, spearman
from .nn import init_params, param_count, reseed_head
from .paper_table import REFERENCE_D90, REFERENCE_LABEL
from .rng import SplitMix64
from .subspace import model_label, train_full, train_subspace
from .svg import line_chart
from .tasks import generate, load_tsv

CSV_COLUMNS = ("task", "model", "method", "d", "lr", "seed", "steps",
               "train_acc", "eval_acc", "full_eval_acc", "threshold", "passed")


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _trial_row(rec, full_metric=None, threshold=None, extra=()):
    passed = "" if threshold is None else rec.eval_acc >= threshold
    cells = [*extra, rec.task, rec.model, rec.method, rec.d, float(rec.learning_rate),
             rec.seed, rec.steps, float(rec.train_acc), float(rec.eval_acc),
             None if full_metric is None else float(full_metric),
             None if threshold is None else float(threshold), passed]
    return ",".join(_fmt(c) for c in cells)


def _trials_csv(rows, extra_header=()) -> str:
    header = ",".join((*extra_header, *CSV_COLUMNS))
    return "\n".join([header, *rows]) + "\n"


def _summary_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _config_digest(cfg) -> str:
    blob = json.dumps(cfgmod.to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _output_dir(cfg) -> Path:
    out = cfg.output_dir or os.environ.get("IDIM_OUTPUT_DIR") or "idim-out"
    return Path(out)


def _build_dataset(task_cfg):
    if isinstance(task_cfg, cfgmod.TsvTask):
        return load_tsv(task_cfg.path, task_cfg.schema, seed=task_cfg.seed, name=task_cfg.name)
    return generate(task_cfg)


def _require_sections(cfg, names) -> None:
    for name in names:
        if getattr(cfg, name) in (None, (), []):
            raise ConfigError(f"this command requires the {name!r} config section")


def _scratch_theta0(cfg):
    theta0 = init_params(cfg.model, cfg.init_seed)
    return reseed_head(cfg.model, theta0)


# ---------------------------------------------------------------------------
# commands


def cmd_fwht_bench(args) -> int:
    sizes = args.size or [2 ** k for k in range(10, 17)]
    for n in sizes:
        if not is_power_of_two(n):
            raise ConfigError(f"size {n} is not a power of two")
    dtype = np.float32 if args.dtype == "float32" else np.float64
    results = []
    for n in sizes:
        buf = SplitMix64(7).uniforms(n).astype(dtype)
        scale = dtype(1.0 / np.sqrt(n))
        for _ in range(2):
            fwht_inplace(buf)
            buf *= scale
        total = 0
        for _ in range(args.reps):
            t0 = time.perf_counter_ns()
            fwht_inplace(buf)
            total += time.perf_counter_ns() - t0
            buf *= scale
        results.append((n, total / args.reps))
    print(f"fwht benchmark ({args.dtype}, {args.reps} reps)")
    print(f"{'size':>10} {'mean ns':>14} {'ns/elem':>10} {'ratio':>7}")
    prev = None
    for n, ns in results:
        ratio = "" if prev is None else f"{ns / prev:.2f}"
        print(f"{n:>10} {ns:>14.0f} {ns / n:>10.2f} {ratio:>7}")
        prev = ns
    return 0


def cmd_train(args) -> int:
    cfg = cfgmod.load_config(args.config)
    _require_sections(cfg, ("task", "train"))
    out = _output_dir(cfg)
    data = _build_dataset(cfg.task)
    theta0 = _scratch_theta0(cfg)
    if cfg.method == "full":
        rec = train_full(cfg.model, theta0, data, replace(cfg.train, seed=cfg.seed))
    else:
        if cfg.d is None:
            raise ConfigError("subspace training requires top-level 'd'")
        rec = train_subspace(cfg.model, theta0, data, cfg.method, cfg.d,
                             replace(cfg.train, seed=cfg.seed), proj_kind=cfg.projection)
    _atomic_write(out / "train_results.csv", _trials_csv([_trial_row(rec)]))
    summary = {"command": "train", "config_digest": _config_digest(cfg), "task": rec.task,
               "model": rec.model, "method": rec.method, "D": theta0.dim, "d": rec.d,
               "eval_acc": rec.eval_acc, "train_acc": rec.train_acc, "best_step": rec.best_step,
               "status": rec.status, "seed": rec.seed}
    _atomic_write(out / "train_summary.json", _summary_json(summary))
    if cfg.save_encoding and cfg.method != "full":
        save_task_encoding(out / "train_encoding.idte", rec)
    print(f"{rec.method} run on {rec.task}: eval_acc={rec.eval_acc:.4f} "
          f"train_acc={rec.train_acc:.4f} status={rec.status}")
    if rec.status != "ok":
        print(f"idim: error: numeric: training run ended with status {rec.status}", file=sys.stderr)
        return 1
    return 0


def cmd_d90(args) -> int:
    cfg = cfgmod.load_config(args.config)
    _require_sections(cfg, ("task", "train"))
    if cfg.method == "full":
        raise ConfigError("d90 measures subspace methods; set method to 'did' or 'said'")
    d90_cfg = replace(cfg.d90, search="exhaustive") if args.exhaustive else cfg.d90
    out = _output_dir(cfg)
    data = _build_dataset(cfg.task)
    theta0 = _scratch_theta0(cfg)
    res = find_d90(cfg.model, theta0, data, cfg.method, d90_cfg,
                   replace(cfg.train, seed=cfg.seed), proj_kind=cfg.projection,
                   threads=args.threads)
    rows = [_trial_row(r, res.full_metric, res.threshold) for r in res.trials]
    _atomic_write(out / "results.csv", _trials_csv(rows))
    summary = {"command": "d90", "config_digest": _config_digest(cfg), "task": data.spec.label,
               "model": model_label(cfg.model), "method": cfg.method, "D": theta0.dim,
               "d90": res.d90, "full_metric": res.full_metric, "threshold": res.threshold,
               "majority_acc": res.majority_acc, "monotonicity_violated": res.monotonicity_violated,
               "search": res.search, "grid": list(res.grid),
               "probed": {str(k): v for k, v in sorted(res.probed.items())},
               "num_trials": len(res.trials)}
    _atomic_write(out / "summary.json", _summary_json(summary))
    if args.plot:
        ds = sorted(res.probed)
        series = [("best over lrs", ds, [res.probed[d] for d in ds]),
                  ("threshold", ds, [res.threshold] * len(ds))]
        _atomic_write(out / "d90_metric.svg",
                      line_chart(series, f"eval accuracy vs d ({data.spec.label})",
                                 "d", "eval accuracy", log_x=True))
    shown = "NOT_FOUND" if res.d90 is None else str(res.d90)
    print(f"d90={shown} (full={res.full_metric:.4f}, threshold={res.threshold:.4f}, "
          f"D={theta0.dim}, method={cfg.method})")
    return 0


def cmd_trajectory(args) -> int:
    cfg = cfgmod.load_config(args.config)
    _require_sections(cfg, ("pretrain", "tasks", "train"))
    if cfg.method == "full":
        raise ConfigError("trajectory measures subspace methods; set method to 'did' or 'said'")
    if isinstance(cfg.pretrain.task, cfgmod.TsvTask):
        raise ConfigError("pretraining needs a synthetic masked_pretrain task")
    out = _output_dir(cfg)
    res = trajectory(cfg.model, cfg.pretrain.task, replace(cfg.pretrain.train, seed=cfg.seed),
                     cfg.pretrain.checkpoints, cfg.tasks, cfg.d90,
                     replace(cfg.train, seed=cfg.seed), method=cfg.method,
                     threads=args.threads, checkpoint_dir=str(out / "checkpoints"))
    rows = []
    for cell in res.cells:
        for rec in cell.trials:
            rows.append(_trial_row(rec, cell.full_metric, cell.threshold, extra=(cell.key,)))
    _atomic_write(out / "results.csv", _trials_csv(rows, extra_header=("checkpoint_step",)))
    summary = {"command": "trajectory", "config_digest": _config_digest(cfg),
               "method": cfg.method, "checkpoint_steps": list(res.checkpoint_steps),
               "pretrain_eval_acc": res.pretrain_record.eval_acc,
               "cells": [_cell_doc(c, "checkpoint_step") for c in res.cells]}
    _atomic_write(out / "summary.json", _summary_json(summary))
    if args.plot:
        series = []
        for task in sorted({c.task for c in res.cells}):
            cells = [c for c in res.cells if c.task == task]
            series.append((task, [c.key for c in cells], [c.d90 for c in cells]))
        _atomic_write(out / "trajectory_d90.svg",
                      line_chart(series, "d90 across pretraining checkpoints",
                                 "pretraining step", "d90", log_y=True))
    for cell in res.cells:
        shown = "NOT_FOUND" if cell.d90 is None else str(cell.d90)
        note = f" error={cell.error}" if cell.error else ""
        print(f"step={cell.key} task={cell.task} d90={shown}{note}")
    return 0


def cmd_widths(args) -> int:
    cfg = cfgmod.load_config(args.config)
    _require_sections(cfg, ("pretrain", "tasks", "train", "widths"))
    if cfg.method == "full":
        raise ConfigError("widths measures subspace methods; set method to 'did' or 'said'")
    if isinstance(cfg.pretrain.task, cfgmod.TsvTask):
        raise ConfigError("pretraining needs a synthetic masked_pretrain task")
    out = _output_dir(cfg)
    res = width_sweep(cfg.widths, cfg.model, cfg.pretrain.task,
                      replace(cfg.pretrain.train, seed=cfg.seed), cfg.tasks, cfg.d90,
                      replace(cfg.train, seed=cfg.seed), method=cfg.method,
                      threads=args.threads)
    rows = []
    for cell in res.cells:
        for rec in cell.trials:
            rows.append(_trial_row(rec, cell.full_metric, cell.threshold, extra=(cell.key,)))
    _atomic_write(out / "results.csv", _trials_csv(rows, extra_header=("width",)))
    found = [(c.dim_full, c.d90) for c in res.cells if c.d90 is not None]
    rho = spearman([f[0] for f in found], [f[1] for f in found]) if len(found) >= 2 else None
    summary = {"command": "widths", "config_digest": _config_digest(cfg), "method": cfg.method,
               "widths": list(res.widths), "spearman_D_d90": rho,
               "cells": [_cell_doc(c, "width") for c in res.cells]}
    _atomic_write(out / "summary.json", _summary_json(summary))
    if args.plot:
        series = []
        for task in sorted({c.task for c in res.cells}):
            cells = [c for c in res.cells if c.task == task]
            series.append((task, [c.dim_full for c in cells], [c.d90 for c in cells]))
        _atomic_write(out / "widths_loglog.svg",
                      line_chart(series, "d90 vs parameter count", "D", "d90",
                                 log_x=True, log_y=True))
    for cell in res.cells:
        shown = "NOT_FOUND" if cell.d90 is None else str(cell.d90)
        note = f" error={cell.error}" if cell.error else ""
        print(f"width={cell.key} D={cell.dim_full} task={cell.task} d90={shown}{note}")
    if rho is not None:
        print(f"spearman(D, d90) = {rho:.3f}")
    return 0


def _cell_doc(cell, key_name: str) -> dict:
    return {key_name: cell.key, "task": cell.task, "D": cell.dim_full, "d90": cell.d90,
            "full_metric": cell.full_metric, "threshold": cell.threshold,
            "eval_acc": cell.eval_acc, "train_acc": cell.train_acc,
            "relative_gap": cell.rel_gap, "error": cell.error}


def cmd_report(args) -> int:
    import csv as csvmod

    path = Path(args.infile)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csvmod.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in CSV_COLUMNS if c not in header]
            if missing:
                raise ConfigError(f"{path}: missing required columns {missing}")
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None

    dim_by_model = {}
    summary_path = Path(args.summary) if args.summary else path.with_name("summary.json")
    if summary_path.exists():
        doc = json.loads(summary_path.read_text(encoding="utf-8"))
        if "model" in doc and "D" in doc:
            dim_by_model[doc["model"]] = doc["D"]

    measured = {}
    for row in rows:
        if row["method"] in ("full", "") or row["passed"] == "":
            continue
        key = (row["model"], row["task"], row["method"])
        if row["passed"] == "true":
            d = int(row["d"])
            if key not in measured or d < measured[key]:
                measured[key] = d

    lines = [f"{'source':<10} {'model':<42} {'task':<28} {'method':<7} {'d90':>8} {'d90/D':>10}"]
    for (model, task, method), d90 in sorted(measured.items()):
        dim = dim_by_model.get(model)
        ratio = f"{d90 / dim:.4g}" if dim else "-"
        lines.append(f"{'measured':<10} {model:<42} {task:<28} {method:<7} {d90:>8} {ratio:>10}")
    if not measured:
        lines.append("(no measured d90 rows)")
    if args.paper_table:
        lines.append("")
        lines.append(REFERENCE_LABEL)
        for model, task, method, d90 in REFERENCE_D90:
            lines.append(f"{'reference':<10} {model:<42} {task:<28} {method:<7} {d90:>8} {'-':>10}")
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idim",
                                     description="intrinsic-dimension measurement toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fwht-bench", help="time the Walsh-Hadamard kernel")
    p.add_argument("--size", action="append", type=int, help="transform size (power of two); repeatable")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    p.set_defaults(fn=cmd_fwht_bench)

    for name, fn, help_text in (("train", cmd_train, "run one training run"),
                                ("d90", cmd_d90, "measure d90 for one task/model"),
                                ("trajectory", cmd_trajectory, "d90 across pretraining checkpoints"),
                                ("widths", cmd_widths, "d90 across model widths")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--threads", type=int, default=1, help="sweep concurrency cap (default 1)")
        p.add_argument("--plot", action="store_true", help="also write SVG charts")
        if name == "d90":
            p.add_argument("--exhaustive", action="store_true",
                           help="probe every grid point instead of binary search")
        p.set_defaults(fn=fn)

    p = sub.add_parser("report", help="tabulate measured d90 next to reference values")
    p.add_argument("--in", dest="infile", required=True, help="results.csv from d90/widths")
    p.add_argument("--summary", help="summary.json path (default: sibling of results.csv)")
    p.add_argument("--paper-table", action="store_true", help="append published reference rows")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DataError, InvalidDimensionError, CapacityError) as exc:
        print(f"idim: error: config: {exc}", file=sys.stderr)
        return 2
    except (BaselineDegenerateError, NumericError, UndefinedGapError) as exc:
        print(f"idim: error: experiment: {exc}", file=sys.stderr)
        return 1
    except IdimError as exc:
        print(f"idim: error: internal: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
