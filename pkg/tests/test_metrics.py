"""Tests for classification, resistance and evaluation metrics."""
import json
from dataclasses import replace

import numpy as np
import pytest

from mmtl.data.resistance import SCHEME_ID
from mmtl.errors import ConfigError, DataError
from mmtl.metrics import (
    MetricsReport,
    auc_roc,
    classification_metrics,
    confusion_matrix,
    evaluate,
    regression_metrics,
    resistance_by_class,
)
from mmtl.model import BneckSpec, ModelConfig, build_model


def _pairwise_auc(probs, labels):
    """Brute-force one-vs-rest AUC: fraction of (pos, neg) pairs ordered correctly, ties 1/2."""
    aucs = []
    for c in range(probs.shape[1]):
        pos = probs[labels == c, c]
        neg = probs[labels != c, c]
        if len(pos) == 0 or len(neg) == 0:
            continue
        wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
        aucs.append(wins / (len(pos) * len(neg)))
    return float(np.mean(aucs))


class TestClassification:
    def test_perfect(self):
        rep = classification_metrics([0, 1, 2, 1], [0, 1, 2, 1])
        assert rep.accuracy == 1.0
        assert rep.macro_f1 == 1.0

    def test_all_predicted_class_zero(self):
        rep = classification_metrics([0, 0, 0, 0], [0, 0, 1, 1])
        assert rep.accuracy == 0.5
        assert rep.recall[1] == 0.0
        assert rep.f1[1] == 0.0
        assert rep.precision[1] == 0.0
        assert rep.precision[0] == 0.5

    def test_confusion_rows_are_label_counts(self):
        labels = [0, 0, 1, 2, 2, 2]
        cm = confusion_matrix([1, 0, 1, 2, 0, 2], labels)
        assert cm.sum(axis=1).tolist() == [2, 1, 3]
        assert cm.sum() == 6

    def test_accuracy_is_frequency_weighted_recall(self):
        rng = np.random.default_rng(0)
        labels = rng.integers(0, 4, 200)
        preds = np.where(rng.random(200) < 0.7, labels, rng.integers(0, 4, 200))
        rep = classification_metrics(preds, labels, num_classes=4)
        freq = np.bincount(labels, minlength=4) / 200
        assert rep.accuracy == pytest.approx(float(np.dot(freq, rep.recall)))

    def test_num_classes_pads_matrix(self):
        rep = classification_metrics([0, 1], [0, 1], num_classes=4)
        assert len(rep.confusion) == 4
        assert rep.recall[3] == 0.0

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            classification_metrics([0, 1], [0])

    def test_empty(self):
        with pytest.raises(DataError):
            classification_metrics([], [])


class TestAucRoc:
    def test_perfect_separation(self):
        probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]])
        assert auc_roc(probs, [0, 0, 1, 1]) == 1.0

    def test_inverted(self):
        probs = np.array([[0.1, 0.9], [0.2, 0.8], [0.7, 0.3], [0.9, 0.1]])
        assert auc_roc(probs, [0, 0, 1, 1]) == 0.0

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(4)
        logits = np.round(rng.standard_normal((150, 3)), 1)
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        labels = rng.integers(0, 3, 150)
        assert auc_roc(probs, labels) == pytest.approx(_pairwise_auc(probs, labels), abs=1e-9)

    def test_random_labels_near_half(self):
        rng = np.random.default_rng(1)
        probs = rng.dirichlet(np.ones(3), 10_000)
        labels = rng.integers(0, 3, 10_000)
        assert 0.48 <= auc_roc(probs, labels) <= 0.52

    def test_absent_class_skipped(self):
        probs = np.array([[0.9, 0.05, 0.05], [0.1, 0.85, 0.05]])
        assert auc_roc(probs, [0, 1]) == 1.0

    def test_single_class_undefined(self):
        with pytest.raises(DataError):
            auc_roc(np.array([[0.5, 0.5], [0.6, 0.4]]), [0, 0])


class TestRegression:
    def test_perfect(self):
        rep = regression_metrics([0.2, 0.5, 0.9], [0.2, 0.5, 0.9])
        assert (rep.mae, rep.rmse, rep.fer_percent, rep.rpa_percent) == (0.0, 0.0, 0.0, 100.0)

    def test_small_offset(self):
        true = np.array([0.5, 0.6, 0.8, 1.0])
        rep = regression_metrics(true + 0.05, true, tau=0.10)
        assert rep.mae == pytest.approx(0.05)
        assert rep.rmse == pytest.approx(0.05)
        assert rep.rpa_percent == 100.0
        assert rep.fer_percent == pytest.approx(100 * np.mean(0.05 / true))

    def test_large_offset(self):
        true = np.array([0.1, 0.3, 0.5])
        assert regression_metrics(true + 0.2, true, tau=0.10).rpa_percent == 0.0

    def test_fer_floor_near_zero(self):
        rep = regression_metrics([0.01], [0.0], fer_floor=0.05)
        assert rep.fer_percent == pytest.approx(20.0)

    def test_tau_recorded(self):
        rep = regression_metrics([0.5], [0.5], tau=0.2)
        assert rep.tau == 0.2
        assert rep.fer_floor == 0.05

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        pred, true = rng.random(50), rng.random(50)
        perm = rng.permutation(50)
        a = regression_metrics(pred, true)
        b = regression_metrics(pred[perm], true[perm])
        for name in ("mae", "rmse", "fer_percent", "rpa_percent"):
            assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-12)

    def test_bad_tau(self):
        with pytest.raises(ConfigError):
            regression_metrics([0.5], [0.5], tau=0)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            regression_metrics([0.5, 0.4], [0.5])

    def test_by_class(self):
        out = resistance_by_class([0.3, 0.5, 0.9], [0.25, 0.5, 0.5], [0, 0, 1], ["walk", "run", "sit"])
        assert set(out) == {"walk", "run"}
        assert out["walk"]["samples"] == 2
        assert out["walk"]["mae"] == pytest.approx(0.025)
        assert out["run"]["rpa_percent"] == 0.0


class TestMetricsReport:
    def test_merge_fills_missing(self):
        a = classification_metrics([0, 1], [0, 1])
        b = regression_metrics([0.5, 0.4], [0.5, 0.4])
        merged = a.merge(b)
        assert merged.accuracy == 1.0
        assert merged.mae == 0.0
        assert merged.samples == 2

    def test_schema_stable_and_stamped(self):
        d = MetricsReport().to_dict()
        assert list(d)[:2] == ["samples", "accuracy"]
        assert d["resistance_scheme"] == SCHEME_ID
        assert "rpa_percent" in d and "fer_floor" in d


def _model_and_data(n=30):
    cfg = ModelConfig(input_channels=3, input_length=16, stem_channels=4, feature_dim=8,
                      num_classes=3, blocks=(BneckSpec(8, 4, 3, 1, True),))
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n, 3, 16)).astype(np.float32)
    y = np.arange(n) % 3
    r = rng.uniform(0, 1, n).astype(np.float32)
    return cfg, build_model(cfg, 0), (x, y, r)


class TestEvaluate:
    def test_full_report(self):
        cfg, params, data = _model_and_data()
        rep = evaluate(params, cfg, data, class_names=["a", "b", "c"])
        assert rep.missing() == []
        assert rep.samples == 30
        assert np.sum(rep.confusion) == 30
        assert set(rep.resistance_by_class) == {"a", "b", "c"}

    def test_deterministic_json(self):
        cfg, params, data = _model_and_data()
        a = json.dumps(evaluate(params, cfg, data).to_dict(), sort_keys=True)
        b = json.dumps(evaluate(params, cfg, data).to_dict(), sort_keys=True)
        assert a == b

    def test_class_count_mismatch(self):
        cfg, params, data = _model_and_data()
        with pytest.raises(DataError, match="3 activity classes"):
            evaluate(params, cfg, data, class_names=["a", "b"])

    def test_channel_mismatch(self):
        cfg, params, (x, y, r) = _model_and_data()
        with pytest.raises(DataError):
            evaluate(params, cfg, (x[:, :2], y, r))

    def test_resistance_only_model(self):
        cfg, _, data = _model_and_data()
        cfg = replace(cfg, enable_mtl=False, task="resistance")
        rep = evaluate(build_model(cfg, 0), cfg, data)
        assert rep.accuracy is None
        assert rep.mae is not None
