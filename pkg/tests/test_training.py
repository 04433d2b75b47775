"""Tests for the training loop, early stopping, resume, divergence and fine-tuning."""
import itertools
import logging

import numpy as np
import pytest

from mmtl.data.pipeline import DatasetConfig, prepare_dataset
from mmtl.errors import DataError, TrainingDiverged
from mmtl.model import BneckSpec, ModelConfig, build_model
from mmtl.model.network import is_head
from mmtl.model.losses import LossParts
from mmtl.training import loop
from mmtl.training.checkpoint import load_checkpoint
from mmtl.training.config import TrainConfig
from mmtl.training.journal import TrainJournal
from mmtl.training.loop import ValResult, batches, fine_tune, train, transfer_params


def _config(**overrides):
    base = dict(input_channels=3, input_length=16, stem_channels=4, feature_dim=8, num_classes=3,
                blocks=(BneckSpec(8, 4, 3, 1, True), BneckSpec(8, 6, 3, 2, True)))
    base.update(overrides)
    return ModelConfig(**base)


def _train_cfg(**overrides):
    base = dict(base_lr=0.01, batch_size=8, weight_decay=0.0, dropout=0.0, epochs=3,
                early_stop_patience=100)
    base.update(overrides)
    return TrainConfig(**base)


def _separable(n_per_class=8, channels=3, length=16, seed=0):
    """Class k lifts channel k; resistance grows with the class."""
    rng = np.random.default_rng(seed)
    xs, ys, rs = [], [], []
    for k in range(3):
        x = 0.1 * rng.standard_normal((n_per_class, channels, length))
        x[:, k % channels, :] += 2.0
        xs.append(x)
        ys.append(np.full(n_per_class, k))
        rs.append(np.full(n_per_class, 0.2 + 0.3 * k))
    return (np.concatenate(xs).astype(np.float32), np.concatenate(ys).astype(np.int64),
            np.concatenate(rs).astype(np.float32))


def _scripted_validation(monkeypatch, losses):
    """Replace validation with a fixed sequence of val losses."""
    seq = iter(losses)

    def fake(params, config, x, y, r):
        v = next(seq)
        return ValResult(LossParts(v, v, 0.0), 0.5, 0.1)

    monkeypatch.setattr(loop, "validate", fake)


class TestBatches:
    def test_covers_all_indices(self):
        out = batches(10, 4, np.random.default_rng(0))
        assert [len(b) for b in out] == [4, 4, 2]
        assert sorted(np.concatenate(out).tolist()) == list(range(10))

    def test_drops_singleton_tail(self):
        out = batches(9, 4, np.random.default_rng(0))
        assert [len(b) for b in out] == [4, 4]


class TestTrain:
    def test_loss_decreases_on_separable_data(self):
        data = _separable()
        ckpt, history = train(_config(), _train_cfg(epochs=40), data, data)
        assert history.records[-1].train_loss < 0.5 * history.records[0].train_loss
        assert max(r.val_accuracy for r in history.records) >= 0.9
        assert ckpt.epoch == 40

    def test_overfits_one_batch(self):
        data = _separable(n_per_class=2)
        _, history = train(_config(), _train_cfg(epochs=200, batch_size=6, lr_decay_every=1000),
                           data, data)
        assert history.records[-1].train_loss < 0.01

    def test_history_epochs_and_lr(self):
        data = _separable()
        _, history = train(_config(), _train_cfg(epochs=3, lr_decay_every=2), data, data)
        assert [r.epoch for r in history.records] == [1, 2, 3]
        assert [r.lr for r in history.records] == pytest.approx([0.01, 0.01, 0.001])

    def test_deterministic(self):
        data = _separable()
        a, _ = train(_config(dropout_rate=0.3), _train_cfg(dropout=0.3), data, data)
        b, _ = train(_config(dropout_rate=0.3), _train_cfg(dropout=0.3), data, data)
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])

    def test_train_config_overrides_dropout_and_weights(self):
        data = _separable()
        ckpt, _ = train(_config(), _train_cfg(epochs=1, dropout=0.25, alpha=2.0), data, data)
        assert ckpt.model_config.dropout_rate == 0.25
        assert ckpt.model_config.loss_alpha == 2.0

    def test_override_of_model_values_is_logged(self, caplog):
        model_cfg = _config(dropout_rate=0.1, loss_beta=3.0)
        with caplog.at_level(logging.WARNING, logger="mmtl.train"):
            cfg = loop.effective_model_config(model_cfg, _train_cfg(dropout=0.25))
        assert (cfg.dropout_rate, cfg.loss_alpha, cfg.loss_beta) == (0.25, 1.0, 1.0)
        overridden = sorted(r.data["field"] for r in caplog.records if hasattr(r, "data"))
        assert overridden == ["dropout_rate", "loss_beta"]

    def test_matching_model_values_are_silent(self, caplog):
        with caplog.at_level(logging.WARNING, logger="mmtl.train"):
            loop.effective_model_config(_config(dropout_rate=0.25), _train_cfg(dropout=0.25))
        assert not [r for r in caplog.records if r.name == "mmtl.train"]

    def test_early_stop_after_patience(self, monkeypatch):
        _scripted_validation(monkeypatch, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])
        data = _separable()
        ckpt, history = train(_config(), _train_cfg(epochs=20, early_stop_patience=5), data, data)
        assert history.last_epoch == 6
        assert ckpt.epoch == 6
        assert ckpt.extras["wait"] == 5

    def test_keeps_best_params(self, monkeypatch):
        data = _separable()
        _scripted_validation(monkeypatch, [3.0, 1.0])
        ref, _ = train(_config(), _train_cfg(epochs=2), data, data)
        _scripted_validation(monkeypatch, [3.0, 1.0, 2.0, 2.0])
        ckpt, history = train(_config(), _train_cfg(epochs=10, early_stop_patience=2), data, data)
        assert history.last_epoch == 4
        assert ckpt.extras["best_val_loss"] == 1.0
        for name in ref.params:
            np.testing.assert_array_equal(ckpt.params[name], ref.params[name])

    def test_resume_matches_uninterrupted_run(self, monkeypatch, tmp_path):
        data = _separable()
        _scripted_validation(monkeypatch, [4.0, 3.0, 2.0, 1.0])
        straight, _ = train(_config(), _train_cfg(epochs=4), data, data)

        _scripted_validation(monkeypatch, [4.0, 3.0, 2.0, 1.0])
        first, _ = train(_config(), _train_cfg(epochs=2), data, data)
        first.save(tmp_path / "half.mmtl")
        saved = load_checkpoint(tmp_path / "half.mmtl")
        resumed, history = train(saved.model_config, saved.train_config, data, data,
                                 params=saved.params, optimizer=saved.optimizer,
                                 history=saved.history, epochs=2, extras=saved.extras)
        assert [r.epoch for r in history.records] == [1, 2, 3, 4]
        assert resumed.optimizer.t == straight.optimizer.t
        for name in straight.params:
            np.testing.assert_array_equal(resumed.params[name], straight.params[name])

    def test_divergence_returns_last_good(self, monkeypatch):
        data = _separable()
        _scripted_validation(monkeypatch, [3.0, 2.0, 1.0])
        real = loop.batch_loss
        calls = itertools.count(1)

        def flaky(*args):
            parts = real(*args)
            # 3 batches per epoch; poison the first batch of epoch 3
            return LossParts(float("nan"), parts.activity, parts.resistance) if next(calls) == 7 else parts

        monkeypatch.setattr(loop, "batch_loss", flaky)
        with pytest.raises(TrainingDiverged) as err:
            train(_config(), _train_cfg(epochs=5), data, data)
        last_good = err.value.last_good
        assert last_good.epoch == 2
        assert last_good.history.last_epoch == 2

    def test_freeze_backbone_only_moves_heads(self):
        data = _separable()
        cfg = _config()
        start = build_model(cfg, 0)
        ckpt, _ = train(cfg, _train_cfg(epochs=2, freeze_backbone=True), data, data, params=start)
        for name, arr in start.items():
            if is_head(name):
                assert not np.array_equal(ckpt.params[name], arr), name
            else:
                np.testing.assert_array_equal(ckpt.params[name], arr)

    def test_single_task_resistance(self):
        data = _separable()
        cfg = _config(enable_mtl=False, task="resistance")
        ckpt, history = train(cfg, _train_cfg(epochs=2), data, data)
        assert history.records[-1].val_accuracy is None
        assert history.records[-1].val_mae is not None
        assert "activity.weight" not in ckpt.params

    def test_journal_gets_one_entry_per_epoch(self):
        data = _separable()
        journal = TrainJournal(None, "run-t")
        train(_config(), _train_cfg(epochs=3), data, data, journal=journal)
        assert [e["epoch"] for e in journal.entries if e["phase"] == "epoch"] == [1, 2, 3]

    def test_empty_val_split(self):
        data = _separable()
        empty = (data[0][:0], data[1][:0], data[2][:0])
        with pytest.raises(DataError):
            train(_config(), _train_cfg(), data, empty)

    def test_channel_mismatch(self):
        data = _separable(channels=4)
        with pytest.raises(DataError):
            train(_config(), _train_cfg(), data, data)

    def test_synthetic_dataset_is_learnable(self):
        prepared = prepare_dataset(DatasetConfig(name="synthetic", seed=1))
        cfg = _config(input_length=prepared.info.window)
        _, history = train(cfg, _train_cfg(epochs=15, batch_size=16), prepared.train, prepared.val)
        assert max(r.val_accuracy for r in history.records) >= 0.9


class TestFineTune:
    def _source(self):
        data = _separable()
        ckpt, _ = train(_config(), _train_cfg(epochs=1), data, data)
        return ckpt

    def test_zero_epochs_keeps_source_params(self):
        src = self._source()
        data = _separable()
        tuned, history = fine_tune(src, data, data, _train_cfg(), epochs=0)
        assert len(history) == 0
        assert tuned.params.keys() == src.params.keys()
        for name in src.params:
            np.testing.assert_array_equal(tuned.params[name], src.params[name])

    def test_new_class_count_reinitializes_activity_head(self):
        src = self._source()
        data = _separable()
        params, reinit = transfer_params(src.params, _config(num_classes=5), seed=0)
        assert set(reinit) == {"activity.weight", "activity.bias"}
        assert params["activity.weight"].shape == (5, 8)
        np.testing.assert_array_equal(params["stem.conv.weight"], src.params["stem.conv.weight"])
        tuned, _ = fine_tune(src, data, data, _train_cfg(), num_classes=5, epochs=1)
        assert tuned.model_config.num_classes == 5

    def test_new_channel_count_reinitializes_stem(self):
        src = self._source()
        data = _separable(channels=6)
        tuned, _ = fine_tune(src, data, data, _train_cfg(), epochs=0)
        assert tuned.model_config.input_channels == 6
        assert tuned.params["stem.conv.weight"].shape[1] == 6
        np.testing.assert_array_equal(tuned.params["head.conv.weight"], src.params["head.conv.weight"])

    def test_default_epochs_from_config(self):
        src = self._source()
        data = _separable()
        _, history = fine_tune(src, data, data, _train_cfg(finetune_epochs=2))
        assert history.last_epoch == 2
