"""Tests for config loader."""
import json
from pathlib import Path

import pytest

from mmtl.config import Config, dataset_config, load_config, model_config, train_config
from mmtl.errors import ConfigError
from mmtl.model import ModelConfig
from mmtl.training.config import TrainConfig

REPO = Path(__file__).resolve().parents[1]


def _write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if name.endswith(".json") else data)
    return path


class TestConfig:
    def test_defaults(self):
        cfg = load_config()
        assert cfg.dataset.name == "uci-har"
        assert cfg.train.base_lr == 0.001
        assert cfg.metrics.tau == 0.10
        assert cfg.bench.runs == 1000

    def test_attribute_access(self):
        cfg = Config({"a": 1, "b": {"c": 2}})
        assert cfg.a == 1
        assert cfg.b.c == 2

    def test_get(self):
        cfg = Config({"x": 42})
        assert cfg.get("x") == 42
        assert cfg.get("y", "default") == "default"

    def test_json_file_merges(self, tmp_path):
        path = _write(tmp_path, {"dataset": {"name": "synthetic"}, "train": {"epochs": 3}})
        cfg = load_config(path)
        assert cfg.dataset.name == "synthetic"
        assert cfg.train.epochs == 3
        assert cfg.train.batch_size == 32

    def test_yaml_file(self, tmp_path):
        path = _write(tmp_path, "dataset:\n  name: wisdm\n", name="run.yaml")
        assert load_config(path).dataset.name == "wisdm"

    def test_unknown_key_named(self, tmp_path):
        path = _write(tmp_path, {"train": {"momentum": 0.9}})
        with pytest.raises(ConfigError, match="train.momentum"):
            load_config(path)

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="optimizer"):
            load_config(_write(tmp_path, {"optimizer": {}}))

    def test_unknown_block_key(self, tmp_path):
        path = _write(tmp_path, {"model": {"blocks": [{"expand_channels": 8, "out_channels": 8,
                                                       "groups": 2}]}})
        with pytest.raises(ConfigError, match="model.blocks.0.groups"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("MMTL_DATASET_NAME", "mhealth")
        monkeypatch.setenv("MMTL_SEED", "7")
        cfg = load_config()
        assert cfg.dataset.name == "mhealth"
        assert (cfg.dataset.seed, cfg.train.seed) == (7, 7)

    def test_bad_env_seed(self, monkeypatch):
        monkeypatch.setenv("MMTL_SEED", "seven")
        with pytest.raises(ConfigError):
            load_config()

    def test_seed_argument_wins(self, monkeypatch):
        monkeypatch.setenv("MMTL_SEED", "7")
        cfg = load_config(seed=11)
        assert (cfg.dataset.seed, cfg.train.seed) == (11, 11)

    def test_as_dict(self):
        cfg = Config({"a": 1, "b": 2})
        assert cfg.as_dict() == {"a": 1, "b": 2}


class TestTypedSections:
    def test_default_file_matches_defaults(self):
        cfg = load_config(REPO / "configs" / "default.json")
        assert cfg.as_dict() == load_config().as_dict()

    def test_smoke_file_loads(self):
        cfg = load_config(REPO / "configs" / "smoke.yaml")
        ds = dataset_config(cfg)
        model = model_config(cfg, ds)
        assert ds.name == "synthetic"
        assert model.input_length == 64
        assert len(model.blocks) == 2

    def test_model_resolved_from_dataset(self):
        cfg = load_config()
        model = model_config(cfg, dataset_config(cfg))
        assert model == ModelConfig(input_channels=9, input_length=128, num_classes=6)

    def test_explicit_model_shape_kept(self, tmp_path):
        cfg = load_config(_write(tmp_path, {"dataset": {"name": "wisdm"},
                                            "model": {"num_classes": 6, "input_length": 128}}))
        model = model_config(cfg, dataset_config(cfg))
        assert model.input_channels == 3
        assert model.input_length == 128

    def test_train_section(self):
        assert train_config(load_config()) == TrainConfig()

    def test_invalid_value(self, tmp_path):
        cfg = load_config(_write(tmp_path, {"train": {"batch_size": 0}}))
        with pytest.raises(ConfigError):
            train_config(cfg)
