"""Classification, regression and combined multi-task losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mmtl.errors import NumericError, ShapeError

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossParts:
    total: float
    activity: float
    resistance: float

    def __iter__(self):
        return iter((self.total, self.activity, self.resistance))


def cross_entropy(probs: np.ndarray, label: int) -> float:
    if probs.ndim != 1:
        raise ShapeError(f"cross_entropy: expected [C], got {probs.shape}")
    if not 0 <= int(label) < probs.shape[0]:
        raise ShapeError(f"cross_entropy: label {label} out of range for {probs.shape[0]} classes")
    return float(-np.log(max(float(probs[int(label)]), PROB_FLOOR)))


def mse(preds: np.ndarray, targets: np.ndarray) -> float:
    preds = np.asarray(preds, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if preds.shape != targets.shape:
        raise ShapeError(f"mse: {preds.shape[0]} predictions vs {targets.shape[0]} targets")
    if preds.size == 0:
        raise ShapeError("mse: empty input")
    return float(np.mean((preds - targets) ** 2))


def _check_weights(alpha: float, beta: float) -> None:
    if alpha < 0 or beta < 0:
        raise NumericError(f"loss weights must be >= 0, got alpha={alpha} beta={beta}")
    if alpha == 0 and beta == 0:
        raise NumericError("loss weights alpha and beta are both zero")


def mtl_loss(activity_probs: np.ndarray, label: int, resistance_pred: float,
             resistance_target: float, alpha: float, beta: float) -> LossParts:
    """total = alpha * cross-entropy + beta * squared error, with both parts."""
    _check_weights(alpha, beta)
    ce = cross_entropy(activity_probs, label)
    se = mse(np.array([resistance_pred]), np.array([resistance_target]))
    return LossParts(alpha * ce + beta * se, ce, se)


# ── batched forms used by the trainer ───────────────────────────────────────

def batch_loss(probs: np.ndarray | None, labels: np.ndarray, resistance: np.ndarray | None,
               targets: np.ndarray, alpha: float, beta: float) -> LossParts:
    """Mean per-sample loss over a batch. A missing head contributes 0 to its part."""
    _check_weights(alpha, beta)
    ce = sq = 0.0
    if probs is not None:
        picked = probs[np.arange(len(labels)), labels].astype(np.float64)
        ce = float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))
    if resistance is not None:
        sq = mse(resistance, targets)
    return LossParts(alpha * ce + beta * sq, ce, sq)


def batch_loss_grads(probs: np.ndarray | None, labels: np.ndarray, resistance: np.ndarray | None,
                     targets: np.ndarray, alpha: float,
                     beta: float) -> tuple[np.ndarray | None, np.ndarray | None]:
    """d(batch_loss)/d(activity logits) and d(batch_loss)/d(raw resistance)."""
    d_logits = d_res = None
    if probs is not None:
        b = probs.shape[0]
        onehot = np.zeros_like(probs, dtype=np.float64)
        onehot[np.arange(b), labels] = 1.0
        d_logits = alpha * (probs.astype(np.float64) - onehot) / b
    if resistance is not None:
        n = resistance.shape[0]
        d_res = beta * 2.0 * (resistance.astype(np.float64) - targets.astype(np.float64)) / n
    return d_logits, d_res
