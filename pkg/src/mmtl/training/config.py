"""Training hyperparameters."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any

from mmtl.errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 0.001
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 10
    batch_size: int = 32
    weight_decay: float = 0.0005
    dropout: float = 0.5
    epochs: int = 50
    finetune_epochs: int = 30
    early_stop_patience: int = 5
    seed: int = 0
    alpha: float = 1.0
    beta: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    freeze_backbone: bool = False

    def __post_init__(self) -> None:
        if self.base_lr <= 0 or self.lr_decay_factor <= 0 or self.adam_eps <= 0:
            raise ConfigError("base_lr, lr_decay_factor and adam_eps must be > 0")
        if self.lr_decay_every < 1:
            raise ConfigError(f"lr_decay_every must be >= 1, got {self.lr_decay_every}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.epochs < 0 or self.finetune_epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.early_stop_patience < 1:
            raise ConfigError(f"early_stop_patience must be >= 1, got {self.early_stop_patience}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("adam betas must be in [0, 1)")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ConfigError("alpha, beta must be >= 0 with a positive sum")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown train config key: train.{unknown[0]}")
        try:
            return cls(**{k: v for k, v in data.items() if v is not None})
        except TypeError as e:
            raise ConfigError(f"invalid train config: {e}") from e
