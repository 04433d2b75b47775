"""Resistance metrics: MAE, RMSE, force error rate and resistance prediction accuracy."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from mmtl.errors import ConfigError, DataError
from mmtl.metrics.report import DEFAULT_TAU, FER_FLOOR, MetricsReport


def _pair(pred: Sequence[float], true: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(true, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise DataError(f"{p.size} resistance predictions for {t.size} targets")
    if p.size == 0:
        raise DataError("no resistance predictions to score")
    return p, t


def force_error_rate(pred: Sequence[float], true: Sequence[float], floor: float = FER_FLOOR) -> float:
    """100 * mean(|pred - true| / max(true, floor))."""
    p, t = _pair(pred, true)
    return float(100.0 * np.mean(np.abs(p - t) / np.maximum(t, floor)))


def resistance_accuracy(pred: Sequence[float], true: Sequence[float], tau: float = DEFAULT_TAU) -> float:
    """Percentage of predictions within tau of the target."""
    if tau <= 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    p, t = _pair(pred, true)
    # inclusive at tau, up to float rounding
    return float(100.0 * np.mean(np.abs(p - t) <= tau + 1e-12))


def regression_metrics(pred: Sequence[float], true: Sequence[float], tau: float = DEFAULT_TAU,
                       fer_floor: float = FER_FLOOR) -> MetricsReport:
    if fer_floor <= 0:
        raise ConfigError(f"fer_floor must be > 0, got {fer_floor}")
    p, t = _pair(pred, true)
    err = p - t
    return MetricsReport(
        samples=int(p.size),
        mae=float(np.mean(np.abs(err))),
        rmse=float(np.sqrt(np.mean(err * err))),
        fer_percent=force_error_rate(p, t, fer_floor),
        rpa_percent=resistance_accuracy(p, t, tau),
        tau=tau,
        fer_floor=fer_floor,
    )


def resistance_by_class(pred: Sequence[float], true: Sequence[float], labels: Sequence[int],
                        class_names: Sequence[str], tau: float = DEFAULT_TAU) -> dict[str, dict[str, float]]:
    """MAE and RPA per activity; classes without samples are left out."""
    p, t = _pair(pred, true)
    y = np.asarray(labels, dtype=np.int64)
    out: dict[str, dict[str, float]] = {}
    for c, name in enumerate(class_names):
        mask = y == c
        if not mask.any():
            continue
        out[name] = {
            "samples": int(mask.sum()),
            "mae": float(np.mean(np.abs(p[mask] - t[mask]))),
            "rpa_percent": resistance_accuracy(p[mask], t[mask], tau),
        }
    return out
