"""Batched eval-mode scoring of a parameter set on a split."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from mmtl.data.pipeline import windows_to_arrays
from mmtl.data.types import LabeledWindow
from mmtl.errors import DataError
from mmtl.log import get_logger
from mmtl.metrics.classification import auc_roc, classification_metrics
from mmtl.metrics.regression import regression_metrics, resistance_by_class
from mmtl.metrics.report import DEFAULT_TAU, FER_FLOOR, MetricsReport
from mmtl.model.config import ModelConfig
from mmtl.model.network import ModelParams, forward_batch

log = get_logger("metrics")

EVAL_BATCH = 256


def predict_batch(params: ModelParams, config: ModelConfig, x: np.ndarray,
                  batch_size: int = EVAL_BATCH) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Activity probabilities [N, classes] and raw resistance [N], eval mode."""
    probs, res = [], []
    for i in range(0, len(x), batch_size):
        out = forward_batch(x[i:i + batch_size], params, config, "eval")
        if out.probs is not None:
            probs.append(out.probs)
        if out.resistance is not None:
            res.append(out.resistance)
    return (np.concatenate(probs) if probs else None,
            np.concatenate(res) if res else None)


def check_compatible(config: ModelConfig, x: np.ndarray, labels: np.ndarray,
                     class_names: Sequence[str] | None) -> None:
    if x.ndim != 3 or x.shape[1] != config.input_channels:
        raise DataError(f"windows {x.shape[1:]} do not match the model's "
                        f"{config.input_channels} input channels")
    if config.has_activity_head:
        if class_names is not None and len(class_names) != config.num_classes:
            raise DataError(f"model has {config.num_classes} activity classes, "
                            f"dataset has {len(class_names)}")
        if len(labels) and int(labels.max()) >= config.num_classes:
            raise DataError(f"label {int(labels.max())} outside the model's "
                            f"{config.num_classes} activity classes")


def evaluate(params: ModelParams, config: ModelConfig,
             windows: Sequence[LabeledWindow] | tuple[np.ndarray, np.ndarray, np.ndarray], *,
             class_names: Sequence[str] | None = None, tau: float = DEFAULT_TAU,
             fer_floor: float = FER_FLOOR) -> MetricsReport:
    x, y, r = windows if isinstance(windows, tuple) else windows_to_arrays(windows)
    if len(x) == 0:
        raise DataError("cannot evaluate an empty split")
    check_compatible(config, x, y, class_names)
    names = list(class_names) if class_names is not None else [str(c) for c in range(config.num_classes)]

    probs, res = predict_batch(params, config, x)
    report = MetricsReport(samples=len(x))
    if probs is not None:
        report = report.merge(classification_metrics(probs.argmax(axis=1), y, config.num_classes))
        try:
            report.auc_roc = auc_roc(probs, y)
        except DataError as e:
            log.warning("%s", e)
        report.class_names = names
    if res is not None:
        reported = np.clip(res, 0.0, 1.0)
        report = report.merge(regression_metrics(reported, r, tau, fer_floor))
        report.resistance_by_class = resistance_by_class(reported, r, y, names, tau)
        report.class_names = names
    log.info("evaluated %d windows: acc %s, mae %s", len(x),
             "-" if report.accuracy is None else f"{report.accuracy:.4f}",
             "-" if report.mae is None else f"{report.mae:.4f}")
    return report
