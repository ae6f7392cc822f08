"""Flat key=value configuration with typed keys.

A config file is plain text, one ``key = value`` per line, ``#`` comments
allowed. Every key can be overridden by a CLI flag of the same name, and the
environment variable ``DIFFSPAN_SEED`` overrides the seed when set.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .data import SynthConfig
from .model import ModelConfig
from .pipeline import InferConfig, TrainConfig

SEED_ENV_VAR = "DIFFSPAN_SEED"


@dataclass(frozen=True)
class Key:
    name: str
    type: str  # int | float | bool | str
    default: Any
    help: str


# Desk-scale defaults: small enough for minute-scale CPU training on the
# synthetic task. Full-scale transformer values (d=256, 4 encoder layers,
# FFN 1024) stay one config file away.
SCHEMA: list[Key] = [
    Key("seed", "int", 0, "master RNG seed (env DIFFSPAN_SEED overrides)"),
    # synthetic corpus
    Key("n_examples", "int", 2000, "synthetic corpus size for gen-data"),
    Key("k", "int", 32, "video clip count (fixed sequence length)"),
    Key("d_v", "int", 32, "raw video feature dim"),
    Key("d_q", "int", 32, "raw query feature dim"),
    Key("n_min", "int", 4, "min query tokens per example"),
    Key("n_max", "int", 12, "max query tokens per example"),
    Key("width_min", "float", 0.1, "min target span width"),
    Key("width_max", "float", 0.5, "max target span width"),
    Key("noise_sigma", "float", 0.5, "feature noise level"),
    Key("pattern_dim", "int", 8, "latent pattern code dim"),
    # model
    Key("d", "int", 64, "hidden size"),
    Key("encoder_layers", "int", 2, "encoder layer count"),
    Key("decoder_layers", "int", 2, "decoder layer count"),
    Key("heads", "int", 8, "attention heads"),
    Key("ffn_dim", "int", 256, "feed-forward hidden size"),
    Key("max_words", "int", 32, "maximum query tokens"),
    Key("dropout", "float", 0.1, "dropout rate in training"),
    Key("span_mode", "str", "add", "span representation: add | feature | cat-fn"),
    Key("time_every_layer", "bool", False, "re-add time embedding at every decoder layer"),
    Key("dtype", "str", "float32", "parameter dtype: float32 | float64"),
    # diffusion + training
    Key("t_total", "int", 1000, "diffusion steps T"),
    Key("lambda_scale", "float", 2.0, "signal scaling factor"),
    Key("n_q_train", "int", 5, "ground-truth replicas per example in training"),
    Key("l1_weight", "float", 1.5, "L1 loss weight"),
    Key("giou_weight", "float", 1.0, "GIoU loss weight"),
    Key("lr", "float", 1e-4, "learning rate"),
    Key("weight_decay", "float", 1e-4, "decoupled weight decay"),
    Key("batch_size", "int", 64, "training batch size"),
    Key("epochs", "int", 30, "training epochs"),
    Key("grad_clip", "float", 1.0, "global gradient-norm clip"),
    Key("cosine_lr", "bool", False, "cosine learning-rate decay"),
    # inference
    Key("queries", "int", 5, "noisy-span inputs at inference"),
    Key("steps", "int", 5, "reverse sampling steps"),
]

_SCHEMA_BY_NAME = {key.name: key for key in SCHEMA}


def _parse_value(key: Key, text: str):
    text = text.strip()
    if key.type == "int":
        return int(text)
    if key.type == "float":
        return float(text)
    if key.type == "bool":
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"cannot parse boolean {key.name}={text!r}")
    return text


def defaults() -> dict[str, Any]:
    return {key.name: key.default for key in SCHEMA}


def read_config_file(path: str | Path) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{line_no}: expected key = value, got {line!r}")
        name, raw = (part.strip() for part in stripped.split("=", 1))
        if name not in _SCHEMA_BY_NAME:
            raise ValueError(f"{path}:{line_no}: unknown config key {name!r}")
        values[name] = _parse_value(_SCHEMA_BY_NAME[name], raw)
    return values


def resolve(file_path: str | Path | None = None,
            overrides: dict[str, Any] | None = None) -> dict[str, Any]:
    """defaults < config file < CLI overrides < DIFFSPAN_SEED."""
    values = defaults()
    if file_path is not None:
        values.update(read_config_file(file_path))
    if overrides:
        for name, value in overrides.items():
            if value is None:
                continue
            if name not in _SCHEMA_BY_NAME:
                raise ValueError(f"unknown config key {name!r}")
            key = _SCHEMA_BY_NAME[name]
            values[name] = _parse_value(key, str(value)) if isinstance(value, str) else value
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        values["seed"] = int(env_seed)
    return values


def write_config_file(values: dict[str, Any], path: str | Path) -> None:
    lines = [f"{key.name} = {values.get(key.name, key.default)}" for key in SCHEMA]
    Path(path).write_text("\n".join(lines) + "\n")


# -- typed config builders ----------------------------------------------------

def synth_config(values: dict[str, Any]) -> SynthConfig:
    return SynthConfig(
        k=values["k"], d_v=values["d_v"], d_q=values["d_q"],
        n_range=(values["n_min"], values["n_max"]),
        width_range=(values["width_min"], values["width_max"]),
        noise_sigma=values["noise_sigma"], pattern_dim=values["pattern_dim"],
        seed=values["seed"],
    )


def model_config(values: dict[str, Any]) -> ModelConfig:
    return ModelConfig(
        d_v=values["d_v"], d_q=values["d_q"], d=values["d"], k=values["k"],
        encoder_layers=values["encoder_layers"], decoder_layers=values["decoder_layers"],
        heads=values["heads"], ffn_dim=values["ffn_dim"], max_words=values["max_words"],
        dropout=values["dropout"], span_mode=values["span_mode"],
        time_every_layer=values["time_every_layer"], dtype=values["dtype"],
    )


def train_config(values: dict[str, Any]) -> TrainConfig:
    return TrainConfig(
        n_q_train=values["n_q_train"], t_total=values["t_total"],
        lambda_scale=values["lambda_scale"], l1_weight=values["l1_weight"],
        giou_weight=values["giou_weight"], lr=values["lr"],
        weight_decay=values["weight_decay"], batch_size=values["batch_size"],
        epochs=values["epochs"], grad_clip=values["grad_clip"],
        cosine_lr=values["cosine_lr"], seed=values["seed"],
    )


def infer_config(values: dict[str, Any]) -> InferConfig:
    return InferConfig(queries=values["queries"], steps=values["steps"], seed=values["seed"])
