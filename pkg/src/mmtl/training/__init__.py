from mmtl.training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from mmtl.training.config import TrainConfig
from mmtl.training.history import EpochRecord, TrainHistory
from mmtl.training.journal import TrainJournal
from mmtl.training.loop import fine_tune, train, transfer_params, validate
from mmtl.training.optim import OptimizerState, adam_step, lr_at

__all__ = [
    "Checkpoint",
    "EpochRecord",
    "OptimizerState",
    "TrainConfig",
    "TrainHistory",
    "TrainJournal",
    "adam_step",
    "fine_tune",
    "load_checkpoint",
    "lr_at",
    "save_checkpoint",
    "train",
    "transfer_params",
    "validate",
]
