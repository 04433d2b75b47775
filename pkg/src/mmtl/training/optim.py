"""Step-decay learning rate and Adam with decoupled weight decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mmtl.errors import NumericError, ShapeError
from mmtl.model.network import ModelParams, is_decayed
from mmtl.training.config import TrainConfig


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams, names: list[str] | None = None) -> OptimizerState:
        names = list(params) if names is None else names
        return cls(
            m={n: np.zeros_like(params[n]) for n in names},
            v={n: np.zeros_like(params[n]) for n in names},
        )


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """base_lr * decay_factor ** floor(epoch / decay_every); epoch counts from 0."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return cfg.base_lr * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


def adam_step(params: ModelParams, grads: ModelParams, state: OptimizerState, lr: float,
              cfg: TrainConfig) -> tuple[ModelParams, OptimizerState]:
    """One Adam update for every tensor in `grads`; other tensors pass through.

    Decay is decoupled, p <- p * (1 - lr * weight_decay), and applied before the
    Adam update to conv/FC weights only.
    """
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(f"{name}: grad {g.shape} vs param {params[name].shape}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name} at step {state.t + 1}")

    t = state.t + 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    new_params = dict(params)
    new_m, new_v = dict(state.m), dict(state.v)
    for name, g in grads.items():
        p = params[name].astype(np.float64)
        g64 = g.astype(np.float64)
        m = b1 * new_m.get(name, np.zeros_like(p)).astype(np.float64) + (1 - b1) * g64
        v = b2 * new_v.get(name, np.zeros_like(p)).astype(np.float64) + (1 - b2) * g64 * g64
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        if cfg.weight_decay and is_decayed(name):
            p = p * (1 - lr * cfg.weight_decay)
        p = p - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        dtype = params[name].dtype
        new_params[name] = p.astype(dtype)
        new_m[name] = m.astype(dtype)
        new_v[name] = v.astype(dtype)
    return new_params, OptimizerState(new_m, new_v, t)
