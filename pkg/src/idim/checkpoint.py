"""Binary persistence: model checkpoints (IDCK) and compact task encodings.

Checkpoint layout, little-endian throughout:

    magic "IDCK" | u32 version=1 | u64 D | u32 m |
    per layer: u32 name_len | name UTF-8 | u64 offset | u64 length |
    D float32 parameter values

A JSON sidecar (same path + ".json") carries the model spec and free-form
metadata.  Values are quantized to float32 on save.

Task encodings are the "seed plus a handful of floats" representation of a
fine-tuned model:

    magic "IDTE" | u32 version=1 | u8 method (0=did, 1=said) | u64 proj_seed |
    u32 d | u32 count | count float32 intrinsic values

Reconstruction needs only this file plus the starting parameters.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import DataError
from .nn import LayerSegment, ModelSpec, ParameterVector
from .projection import make_fastfood, project
from .subspace import RunRecord, SubspaceModel, effective_params

CHECKPOINT_MAGIC = b"IDCK"
ENCODING_MAGIC = b"IDTE"
_METHOD_CODE = {"did": 0, "said": 1}
_CODE_METHOD = {v: k for k, v in _METHOD_CODE.items()}


def save_checkpoint(path, params: ParameterVector, spec: ModelSpec | None = None,
                    metadata: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IQI", 1, params.dim, params.num_layers))
        for seg in params.partition:
            name = seg.name.encode("utf-8")
            fh.write(struct.pack("<I", len(name)))
            fh.write(name)
            fh.write(struct.pack("<QQ", seg.offset, seg.length))
        fh.write(params.values.astype("<f4").tobytes())
    sidecar = {"metadata": metadata or {}}
    if spec is not None:
        sidecar["model"] = {k: list(v) if isinstance(v, tuple) else v
                            for k, v in asdict(spec).items()}
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[ParameterVector, dict]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    if blob[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path} is not an IDCK checkpoint (bad magic)")
    off = 4
    version, dim, m = struct.unpack_from("<IQI", blob, off)
    off += 16
    if version != 1:
        raise DataError(f"unsupported checkpoint version {version}")
    segs = []
    for _ in range(m):
        (name_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        name = blob[off : off + name_len].decode("utf-8")
        off += name_len
        seg_off, seg_len = struct.unpack_from("<QQ", blob, off)
        off += 16
        segs.append(LayerSegment(name, seg_off, seg_len))
    values = np.frombuffer(blob, dtype="<f4", count=dim, offset=off).astype(np.float64)
    if values.shape[0] != dim:
        raise DataError(f"{path} truncated: expected {dim} values")
    sidecar_path = Path(str(path) + ".json")
    sidecar = {}
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
    return ParameterVector(values, tuple(segs)), sidecar


def checkpoint_model_spec(sidecar: dict) -> ModelSpec | None:
    if "model" not in sidecar:
        return None
    raw = dict(sidecar["model"])
    if "hidden" in raw:
        raw["hidden"] = tuple(raw["hidden"])
    return ModelSpec(**raw)


def save_task_encoding(path, record: RunRecord) -> None:
    """Persist a subspace run as (method, seed, d, intrinsic float32 values)."""
    if record.method not in _METHOD_CODE or record.intrinsic is None or record.proj_seed is None:
        raise DataError("task encodings require a subspace run record with its intrinsic vector")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vals = np.asarray(record.intrinsic, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(ENCODING_MAGIC)
        fh.write(struct.pack("<IBQII", 1, _METHOD_CODE[record.method], record.proj_seed,
                             record.d, vals.shape[0]))
        fh.write(vals.tobytes())


def load_task_encoding(path) -> dict:
    blob = Path(path).read_bytes()
    if blob[:4] != ENCODING_MAGIC:
        raise DataError(f"{path} is not an IDTE task encoding (bad magic)")
    version, code, seed, d, count = struct.unpack_from("<IBQII", blob, 4)
    if version != 1:
        raise DataError(f"unsupported task encoding version {version}")
    values = np.frombuffer(blob, dtype="<f4", count=count, offset=4 + 21).astype(np.float64)
    if values.shape[0] != count:
        raise DataError(f"{path} truncated: expected {count} values")
    return {"method": _CODE_METHOD[code], "proj_seed": int(seed), "d": int(d), "intrinsic": values}


def reconstruct_params(theta0: ParameterVector, encoding: dict) -> np.ndarray:
    """Rebuild effective parameters from theta0 plus a task encoding."""
    method = encoding["method"]
    m = theta0.num_layers
    d_sub = encoding["d"] - m if method == "said" else encoding["d"]
    proj = make_fastfood(encoding["proj_seed"], d_sub, theta0.dim)
    theta_d = encoding["intrinsic"][:d_sub]
    lam = encoding["intrinsic"][d_sub:] if method == "said" else None
    sm = SubspaceModel(theta0, proj, method, theta_d, lam)
    return effective_params(sm)
