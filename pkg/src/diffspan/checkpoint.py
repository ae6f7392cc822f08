"""Checkpoint format: a JSON index plus one raw binary blob per parameter.

Blobs are little-endian IEEE floats, row-major, no header; the index records
name, shape, dtype and file for each parameter, a config snapshot, the
training rng state and the step counter. Save -> load round trips are
bit-exact because blobs are written in the parameter's own dtype (float32 by
default).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import ModelConfig, SpanDiffusionModel

FORMAT_VERSION = 1

_DTYPE_CODES = {"float32": "<f4", "float64": "<f8"}


def save_checkpoint(ckpt_dir: str | Path, model: SpanDiffusionModel,
                    config_echo: dict | None = None,
                    rng_state: dict | None = None, step: int = 0) -> Path:
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    params = model.named_parameters()
    index = {
        "format_version": FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "config": config_echo or {},
        "rng_state": rng_state,
        "step": int(step),
        "params": [],
    }
    for name, tensor in params.items():
        dtype_name = tensor.value.dtype.name
        if dtype_name not in _DTYPE_CODES:
            raise ValueError(f"unsupported parameter dtype {dtype_name}")
        filename = name.replace("/", "_") + ".bin"
        blob = np.ascontiguousarray(tensor.value, dtype=_DTYPE_CODES[dtype_name])
        (ckpt_dir / filename).write_bytes(blob.tobytes())
        index["params"].append({
            "name": name,
            "shape": list(tensor.value.shape),
            "dtype": dtype_name,
            "file": filename,
        })
    (ckpt_dir / "index.json").write_text(json.dumps(index, indent=1))
    return ckpt_dir


def load_arrays(ckpt_dir: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    ckpt_dir = Path(ckpt_dir)
    index_path = ckpt_dir / "index.json"
    if not index_path.exists():
        raise FileNotFoundError(f"no checkpoint index at {index_path}")
    index = json.loads(index_path.read_text())
    if index.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {index.get('format_version')}")
    arrays: dict[str, np.ndarray] = {}
    for rec in index["params"]:
        raw = (ckpt_dir / rec["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype=_DTYPE_CODES[rec["dtype"]]).reshape(rec["shape"])
        arrays[rec["name"]] = arr.astype(rec["dtype"], copy=True)
    return arrays, index


def load_model(ckpt_dir: str | Path) -> tuple[SpanDiffusionModel, dict]:
    """Rebuild the model from a checkpoint; returns (model, index)."""
    arrays, index = load_arrays(ckpt_dir)
    config = ModelConfig(**index["model_config"])
    model = SpanDiffusionModel(config, seed=0)
    model.load_parameters(arrays)
    return model, index
