"""Epoch loop: shuffle, batch, forward, multi-task loss, backward, Adam; validate; stop early."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from mmtl.data.pipeline import windows_to_arrays
from mmtl.data.types import LabeledWindow
from mmtl.errors import DataError, NonFiniteError, NumericError, TrainingDiverged
from mmtl.log import get_logger
from mmtl.model.config import ModelConfig
from mmtl.model.losses import LossParts, batch_loss, batch_loss_grads
from mmtl.model.network import (
    ModelParams,
    apply_bn_updates,
    backward_batch,
    build_model,
    forward_batch,
    is_head,
    is_trainable,
)
from mmtl.training.checkpoint import Checkpoint
from mmtl.training.config import TrainConfig
from mmtl.training.history import EpochRecord, TrainHistory
from mmtl.training.journal import TrainJournal
from mmtl.training.optim import OptimizerState, adam_step, lr_at

log = get_logger("train")

EVAL_BATCH = 256
MIN_BATCH = 2


@dataclass(frozen=True)
class ValResult:
    loss: LossParts
    accuracy: float | None
    mae: float | None


Arrays = tuple[np.ndarray, np.ndarray, np.ndarray]


def _as_arrays(data: Sequence[LabeledWindow] | Arrays, what: str) -> Arrays:
    if isinstance(data, tuple):
        x, y, r = data
    else:
        if not data:
            raise DataError(f"{what} split is empty")
        x, y, r = windows_to_arrays(data)
    if len(x) == 0:
        raise DataError(f"{what} split is empty")
    return x, y, r


def effective_model_config(model_cfg: ModelConfig, train_cfg: TrainConfig) -> ModelConfig:
    """Dropout and loss weights come from the training config."""
    applied = {"dropout_rate": train_cfg.dropout, "loss_alpha": train_cfg.alpha,
               "loss_beta": train_cfg.beta}
    for field, value in applied.items():
        current = getattr(model_cfg, field)
        if current != value:
            log.warning("model.%s=%s overridden by train config value %s", field, current, value,
                        extra={"data": {"field": field, "model": current, "train": value}})
    return replace(model_cfg, dropout_rate=train_cfg.dropout,
                   loss_alpha=train_cfg.alpha, loss_beta=train_cfg.beta)


def batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled index batches; a final batch smaller than 2 is dropped."""
    order = rng.permutation(n)
    out = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if out and len(out[-1]) < MIN_BATCH:
        out.pop()
    return out


def validate(params: ModelParams, config: ModelConfig, x: np.ndarray, y: np.ndarray,
             r: np.ndarray) -> ValResult:
    probs_all, res_all = [], []
    for i in range(0, len(x), EVAL_BATCH):
        out = forward_batch(x[i:i + EVAL_BATCH], params, config, "eval")
        if out.probs is not None:
            probs_all.append(out.probs)
        if out.resistance is not None:
            res_all.append(out.resistance)
    probs = np.concatenate(probs_all) if probs_all else None
    res = np.concatenate(res_all) if res_all else None
    loss = batch_loss(probs, y, res, r, config.loss_alpha, config.loss_beta)
    accuracy = float(np.mean(probs.argmax(axis=1) == y)) if probs is not None else None
    mae = float(np.mean(np.abs(np.clip(res, 0, 1) - r))) if res is not None else None
    return ValResult(loss, accuracy, mae)


def train(model_cfg: ModelConfig, train_cfg: TrainConfig,
          train_set: Sequence[LabeledWindow] | Arrays, val_set: Sequence[LabeledWindow] | Arrays, *,
          params: ModelParams | None = None, optimizer: OptimizerState | None = None,
          history: TrainHistory | None = None, epochs: int | None = None,
          journal: TrainJournal | None = None,
          extras: dict | None = None) -> tuple[Checkpoint, TrainHistory]:
    """Train and return the best-validation-loss checkpoint and the full history.

    Passing `params`, `optimizer` and `history` from a checkpoint resumes at
    the next epoch.
    """
    cfg = effective_model_config(model_cfg, train_cfg)
    x, y, r = _as_arrays(train_set, "train")
    xv, yv, rv = _as_arrays(val_set, "val")
    if x.shape[1:] != xv.shape[1:] or x.shape[1] != cfg.input_channels:
        raise DataError(f"train windows {x.shape[1:]}, val windows {xv.shape[1:]}, "
                        f"model expects {cfg.input_channels} channels")
    if len(x) < MIN_BATCH:
        raise DataError(f"need at least {MIN_BATCH} training windows, got {len(x)}")

    params = dict(params) if params is not None else build_model(cfg, train_cfg.seed)
    trainable = [n for n in params
                 if is_trainable(n) and (is_head(n) or not train_cfg.freeze_backbone)]
    opt = optimizer if optimizer is not None else OptimizerState.zeros_like(params, trainable)
    history = history if history is not None else TrainHistory()
    extras = dict(extras or {})
    n_epochs = train_cfg.epochs if epochs is None else epochs
    start = history.last_epoch

    best_loss = float(extras.get("best_val_loss", math.inf))
    wait = int(extras.get("wait", 0))
    best = Checkpoint(params, cfg, train_cfg, opt, history, start, extras)

    def snapshot(epoch: int) -> Checkpoint:
        return Checkpoint(best.params, cfg, train_cfg, best.optimizer, history, epoch,
                          {**extras, "best_val_loss": best_loss, "wait": wait})

    log.info("training %s model: %d epochs from epoch %d, %d train / %d val windows",
             cfg.backbone, n_epochs, start + 1, len(x), len(xv))
    for epoch in range(start + 1, start + n_epochs + 1):
        t0 = time.perf_counter()
        lr = lr_at(epoch - 1, train_cfg)
        rng = np.random.default_rng(train_cfg.seed + epoch)
        totals = np.zeros(3)
        seen = 0
        for idx in batches(len(x), train_cfg.batch_size, rng):
            try:
                out = forward_batch(x[idx], params, cfg, "train", rng, record=True)
            except NonFiniteError as e:
                raise TrainingDiverged(f"epoch {epoch}: {e}", last_good=snapshot(epoch - 1)) from e
            parts = batch_loss(out.probs, y[idx], out.resistance, r[idx],
                               cfg.loss_alpha, cfg.loss_beta)
            if not math.isfinite(parts.total):
                raise TrainingDiverged(f"epoch {epoch}: training loss is {parts.total}",
                                       last_good=snapshot(epoch - 1))
            d_logits, d_res = batch_loss_grads(out.probs, y[idx], out.resistance, r[idx],
                                               cfg.loss_alpha, cfg.loss_beta)
            grads = backward_batch(out, d_logits, d_res)
            grads = {n: grads[n] for n in trainable if n in grads}
            if not train_cfg.freeze_backbone:
                params = apply_bn_updates(params, out.bn_updates)
            try:
                params, opt = adam_step(params, grads, opt, lr, train_cfg)
            except NumericError as e:
                raise TrainingDiverged(f"epoch {epoch}: {e}", last_good=snapshot(epoch - 1)) from e
            totals += len(idx) * np.array([parts.total, parts.activity, parts.resistance])
            seen += len(idx)
            log.debug("epoch %d batch of %d: loss %.5f", epoch, len(idx), parts.total)

        val = validate(params, cfg, xv, yv, rv)
        mean = totals / max(seen, 1)
        record = EpochRecord(
            epoch=epoch, train_loss=float(mean[0]), train_activity_loss=float(mean[1]),
            train_resistance_loss=float(mean[2]), val_loss=val.loss.total,
            val_accuracy=val.accuracy, val_mae=val.mae, lr=lr,
            seconds=round(time.perf_counter() - t0, 3),
        )
        history.append(record)
        if journal:
            journal.epoch(record)
        log.info("epoch %d  lr %.2e  train %.4f  val %.4f  acc %s  mae %s", epoch, lr,
                 record.train_loss, record.val_loss,
                 "-" if val.accuracy is None else f"{val.accuracy:.3f}",
                 "-" if val.mae is None else f"{val.mae:.3f}", extra={"data": record.to_dict()})

        if val.loss.total < best_loss:
            best_loss, wait = val.loss.total, 0
            best = Checkpoint(params, cfg, train_cfg, opt, history, epoch, extras)
        else:
            wait += 1
            if wait >= train_cfg.early_stop_patience:
                log.info("early stop at epoch %d: no val improvement for %d epochs", epoch, wait)
                break

    final = snapshot(history.last_epoch)
    return final, history


def transfer_params(source: ModelParams, config: ModelConfig, seed: int) -> tuple[ModelParams, list[str]]:
    """Fresh params for `config`, overwritten by every source tensor of matching name and shape."""
    params = build_model(config, seed)
    reinit = []
    for name, fresh in params.items():
        src = source.get(name)
        if src is not None and src.shape == fresh.shape:
            params[name] = src.copy()
        else:
            reinit.append(name)
    return params, reinit


def fine_tune(checkpoint: Checkpoint, train_set: Sequence[LabeledWindow] | Arrays,
              val_set: Sequence[LabeledWindow] | Arrays, train_cfg: TrainConfig, *,
              num_classes: int | None = None, epochs: int | None = None,
              journal: TrainJournal | None = None,
              extras: dict | None = None) -> tuple[Checkpoint, TrainHistory]:
    """Continue training a checkpoint on a new dataset.

    The backbone is copied; any tensor whose shape changes (the activity head
    when the class count differs, the stem when the channel count differs) is
    re-initialized.
    """
    x, _, _ = _as_arrays(train_set, "train")
    src_cfg = checkpoint.model_config
    cfg = replace(src_cfg, num_classes=num_classes or src_cfg.num_classes,
                  input_channels=x.shape[1], input_length=x.shape[2])
    params, reinit = transfer_params(checkpoint.params, cfg, train_cfg.seed)
    for name in reinit:
        log.info("fine-tune: re-initialized %s %s", name, params[name].shape)
    n_epochs = train_cfg.finetune_epochs if epochs is None else epochs
    return train(cfg, train_cfg, train_set, val_set, params=params, epochs=n_epochs,
                 journal=journal, extras=extras)
