"""YAML config handling: sectioned key/value files covering every default."""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .losses import LossWeights
from .model import ModelConfig
from .pipeline import RunConfig

DEFAULTS = {
    "train": {
        "stage": "semi",
        "batch_labeled": 4,
        "batch_unlabeled": 4,
        "max_iter": 20000,
        "lr0": 0.001,
        "poly_power": 0.9,
        "momentum": 0.9,
        "weight_decay": 0.0005,
        "seed": 0,
        "device": "cpu",
        "init": "stage1",
        "log_every": 0,
    },
    "data": {
        "input_size": 256,
        "augment": True,
        "rotation_degrees": 10.0,
        "flip_prob": 0.5,
    },
    "loss": {
        "alpha": 1.0,
        "gamma": 0.1,
        "beta1": 0.01,
        "beta2": 1.0,
        "lambda_max": 1.0,
    },
    "model": {
        "encoder": "tiny",
        "channels": [16, 32, 64, 128],
        "norm": "group",
        "common_width": 0,
        "depth_head_width": 64,
        "ablations": [],
    },
    "dgm": {
        "softmax": True,
        "hw_cap": 4096,
    },
    "dim": {
        "attention_channels": "full",
    },
    "decoder": {
        "width": 64,
        "merge": "add",
    },
    "aspp": {
        "rates": [1, 6, 12, 18],
    },
    "ema": {
        "decay": 0.99,
    },
    "perturb": {
        "jitter": 0.4,
        "teacher": "jitter",
    },
}


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise KeyError(f"unknown config key: {where}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"config section {where} must be a mapping")
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Defaults, deep-merged with the YAML file at `path` when given."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    with open(Path(path)) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} must hold a mapping")
    return _merge(DEFAULTS, raw)


def make_run_config(raw: dict = None, **overrides) -> RunConfig:
    """Build a RunConfig from a merged config dict.

    overrides (seed=, device=, stage=, max_iter=, ablations=, ...) replace
    individual fields after the file values.
    """
    raw = copy.deepcopy(raw) if raw is not None else copy.deepcopy(DEFAULTS)
    model = ModelConfig(
        encoder=raw["model"]["encoder"],
        channels=tuple(raw["model"]["channels"]),
        norm=raw["model"]["norm"],
        common_width=raw["model"]["common_width"],
        depth_head_width=raw["model"]["depth_head_width"],
        ablations=tuple(overrides.pop("ablations", raw["model"]["ablations"])),
        dgm_softmax=raw["dgm"]["softmax"],
        dgm_hw_cap=raw["dgm"]["hw_cap"],
        dim_attention_channels=raw["dim"]["attention_channels"],
        decoder_width=raw["decoder"]["width"],
        decoder_merge=raw["decoder"]["merge"],
        aspp_rates=tuple(raw["aspp"]["rates"]),
    )
    loss = LossWeights(**raw["loss"])
    fields = dict(
        stage=raw["train"]["stage"],
        batch_labeled=raw["train"]["batch_labeled"],
        batch_unlabeled=raw["train"]["batch_unlabeled"],
        max_iter=raw["train"]["max_iter"],
        lr0=raw["train"]["lr0"],
        poly_power=raw["train"]["poly_power"],
        momentum=raw["train"]["momentum"],
        weight_decay=raw["train"]["weight_decay"],
        seed=raw["train"]["seed"],
        device=raw["train"]["device"],
        init=raw["train"]["init"],
        log_every=raw["train"]["log_every"],
        input_size=raw["data"]["input_size"],
        augment=raw["data"]["augment"],
        rotation_degrees=raw["data"]["rotation_degrees"],
        flip_prob=raw["data"]["flip_prob"],
        ema_decay=raw["ema"]["decay"],
        jitter=raw["perturb"]["jitter"],
        teacher_perturb=raw["perturb"]["teacher"],
    )
    fields.update(overrides)
    return RunConfig(loss=loss, model=model, **fields)


def dump_defaults() -> str:
    """The full default config as YAML text (for a starter file)."""
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
