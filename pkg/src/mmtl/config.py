"""Run configuration: JSON/YAML file + env vars + --seed, merged over documented defaults."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

import yaml

from mmtl.data.pipeline import DatasetConfig
from mmtl.errors import ConfigError
from mmtl.model.config import DEFAULT_BLOCKS, BneckSpec, ModelConfig
from mmtl.training.config import TrainConfig

_DEFAULTS: dict[str, Any] = {
    "dataset": {
        "name": "uci-har",            # uci-har | wisdm | mhealth | synthetic
        "root": "",
        "window": None,               # null -> dataset default
        "overlap": None,
        "split_mode": "random",       # random | by_subject
        "train_fraction": 0.8,
        "test_fraction": 0.2,
        "rebalance": "oversample",    # oversample | undersample | none
        "augment_ops": ["crop", "rotate"],
        "augment_copies": 1,
        "cache_dir": None,
        "seed": 0,
    },
    "model": {
        "input_channels": None,       # null -> resolved from the dataset
        "input_length": None,
        "num_classes": None,
        "stem_channels": 16,
        "blocks": [asdict(b) for b in DEFAULT_BLOCKS],
        "feature_dim": 96,
        "dropout_rate": 0.5,
        "se_reduction": 4,
        "loss_alpha": 1.0,
        "loss_beta": 1.0,
        "enable_se": True,
        "enable_swish": True,
        "enable_mtl": True,
        "task": "both",
        "backbone": "mobilenet",
        "plain_channels": 64,
        "plain_kernel": 5,
    },
    "train": TrainConfig().to_dict(),
    "metrics": {
        "tau": 0.10,
        "fer_floor": 0.05,
    },
    "bench": {
        "runs": 1000,
        "warmup": 50,
    },
    "log_dir": None,
}

_BLOCK_KEYS = {f.name for f in fields(BneckSpec)}


def _deep_merge(base: dict, override: dict) -> dict:
    merged = base.copy()
    for k, v in override.items():
        if k in merged and isinstance(merged[k], dict) and isinstance(v, dict):
            merged[k] = _deep_merge(merged[k], v)
        else:
            merged[k] = v
    return merged


def _check_keys(data: dict, defaults: dict, prefix: str = "") -> None:
    """Reject any key not present in the defaults, naming it by dotted path."""
    for k, v in data.items():
        if k not in defaults:
            raise ConfigError(f"unknown config key: {prefix}{k}")
        if isinstance(defaults[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {prefix}{k} must be a mapping")
            _check_keys(v, defaults[k], f"{prefix}{k}.")
    if prefix != "model." or data.get("blocks") is None:
        return
    if not isinstance(data["blocks"], list):
        raise ConfigError("config key model.blocks must be a list")
    for i, block in enumerate(data["blocks"]):
        if not isinstance(block, dict):
            raise ConfigError(f"config key model.blocks.{i} must be a mapping")
        for k in block:
            if k not in _BLOCK_KEYS:
                raise ConfigError(f"unknown config key: model.blocks.{i}.{k}")


class Config:
    """Immutable-ish config object with attribute access."""

    def __init__(self, data: dict[str, Any]) -> None:
        self._data = data

    def __getattr__(self, name: str) -> Any:
        try:
            v = self._data[name]
        except KeyError:
            raise AttributeError(name)
        if isinstance(v, dict):
            return Config(v)
        return v

    def get(self, key: str, default: Any = None) -> Any:
        return self._data.get(key, default)

    def as_dict(self) -> dict:
        return dict(self._data)

    def __repr__(self) -> str:
        return f"Config({self._data!r})"


def _env_overrides() -> dict[str, Any]:
    """Pull config from env vars: MMTL_DATASET_NAME, MMTL_DATASET_ROOT, MMTL_SEED."""
    overrides: dict[str, Any] = {}
    mapping = {
        "MMTL_DATASET_NAME": ("dataset", "name"),
        "MMTL_DATASET_ROOT": ("dataset", "root"),
    }
    for env_key, path in mapping.items():
        val = os.environ.get(env_key)
        if val is None:
            continue
        d = overrides
        for part in path[:-1]:
            d = d.setdefault(part, {})
        d[path[-1]] = val
    seed = os.environ.get("MMTL_SEED")
    if seed is not None:
        try:
            overrides = _deep_merge(overrides, _seed_override(int(seed)))
        except ValueError:
            raise ConfigError(f"MMTL_SEED must be an integer, got {seed!r}") from None
    return overrides


def _seed_override(seed: int) -> dict[str, Any]:
    return {"dataset": {"seed": seed}, "train": {"seed": seed}}


def read_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: {e}") from e
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def load_config(path: str | Path | None = None, seed: int | None = None) -> Config:
    """Defaults, then the config file, then env, then an explicit seed."""
    base = dict(_DEFAULTS)
    if path:
        file_cfg = read_config_file(path)
        _check_keys(file_cfg, _DEFAULTS)
        base = _deep_merge(base, file_cfg)
    base = _deep_merge(base, _env_overrides())
    if seed is not None:
        base = _deep_merge(base, _seed_override(seed))
    return Config(base)


# ── typed sections ──────────────────────────────────────────────────────────

def dataset_config(cfg: Config) -> DatasetConfig:
    return DatasetConfig.from_dict(cfg.dataset.as_dict())


def train_config(cfg: Config) -> TrainConfig:
    return TrainConfig.from_dict(cfg.train.as_dict())


def model_config(cfg: Config, dataset: DatasetConfig) -> ModelConfig:
    """ModelConfig with input shape and class count filled from the dataset when unset."""
    data = cfg.model.as_dict()
    info = dataset.info
    if data.get("input_channels") is None:
        data["input_channels"] = len(info.channel_names)
    if data.get("input_length") is None:
        data["input_length"] = dataset.window_len
    if data.get("num_classes") is None:
        data["num_classes"] = info.num_classes
    return ModelConfig.from_dict(data)
