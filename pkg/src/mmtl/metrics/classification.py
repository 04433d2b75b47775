"""Activity metrics: confusion matrix, precision/recall/F1, one-vs-rest AUC-ROC."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from mmtl.errors import DataError
from mmtl.metrics.report import MetricsReport


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Elementwise num/den with 0/0 defined as 0."""
    return np.divide(num, den, out=np.zeros(num.shape, dtype=np.float64), where=den != 0)


def confusion_matrix(predictions: Sequence[int], labels: Sequence[int],
                     num_classes: int | None = None) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    preds = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(labels, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise DataError(f"predictions {preds.shape} vs labels {truth.shape}")
    if preds.size == 0:
        raise DataError("no predictions to score")
    if preds.min() < 0 or truth.min() < 0:
        raise DataError("class ids must be >= 0")
    n = max(int(preds.max()), int(truth.max())) + 1
    if num_classes is not None:
        if n > num_classes:
            raise DataError(f"class id {n - 1} outside {num_classes} classes")
        n = num_classes
    cm = np.zeros((n, n), dtype=np.int64)
    np.add.at(cm, (truth, preds), 1)
    return cm


def classification_metrics(predictions: Sequence[int], labels: Sequence[int],
                           num_classes: int | None = None) -> MetricsReport:
    cm = confusion_matrix(predictions, labels, num_classes)
    tp = np.diag(cm).astype(np.float64)
    precision = _safe_div(tp, cm.sum(axis=0).astype(np.float64))
    recall = _safe_div(tp, cm.sum(axis=1).astype(np.float64))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    total = int(cm.sum())
    return MetricsReport(
        samples=total,
        accuracy=float(tp.sum() / total),
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        confusion=cm.tolist(),
    )


def auc_roc(probs: np.ndarray, labels: Sequence[int]) -> float:
    """Macro one-vs-rest AUC from the Mann-Whitney rank statistic; ties take the average rank.

    Classes with no positive or no negative sample are skipped.
    """
    probs = np.asarray(probs, dtype=np.float64)
    truth = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != truth.shape[0]:
        raise DataError(f"probabilities {probs.shape} vs labels {truth.shape}")
    aucs = []
    for c in range(probs.shape[1]):
        pos = truth == c
        n_pos, n_neg = int(pos.sum()), int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = rankdata(probs[:, c])
        aucs.append((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))
    if not aucs:
        raise DataError("AUC-ROC undefined: labels cover fewer than two classes")
    return float(np.mean(aucs))
