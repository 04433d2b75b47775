"""Architecture description: bottleneck specs and the model config."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Literal

import numpy as np

from mmtl.errors import ConfigError

# Strides of the three plain standard-convolution layers.
PLAIN_STRIDES: tuple[int, ...] = (1, 2, 2)

BlockActivation = Literal["swish", "relu"]
Backbone = Literal["mobilenet", "plain"]
Task = Literal["both", "activity", "resistance"]


@dataclass(frozen=True)
class BneckSpec:
    """One inverted-residual bottleneck: expand -> depthwise -> [SE] -> project."""
    expand_channels: int
    out_channels: int
    kernel_size: int = 5
    stride: int = 1
    use_se: bool = False
    activation: BlockActivation = "swish"

    def __post_init__(self) -> None:
        if not self.expand_channels >= self.out_channels >= 1:
            raise ConfigError(
                f"bneck needs expand_channels >= out_channels >= 1, got "
                f"{self.expand_channels}/{self.out_channels}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"bneck kernel_size must be odd, got {self.kernel_size}")
        if self.stride not in (1, 2):
            raise ConfigError(f"bneck stride must be 1 or 2, got {self.stride}")
        if self.activation not in ("swish", "relu"):
            raise ConfigError(f"bneck activation must be swish|relu, got {self.activation!r}")


# MobileNetV3-Small-like stack scaled to 1D sensor windows.
DEFAULT_BLOCKS: tuple[BneckSpec, ...] = (
    BneckSpec(16, 16, 5, 1, True),
    BneckSpec(64, 24, 5, 2, False),
    BneckSpec(72, 24, 5, 1, False),
    BneckSpec(72, 40, 5, 2, True),
    BneckSpec(120, 40, 5, 1, True),
    BneckSpec(120, 48, 5, 2, True),
)


@dataclass(frozen=True)
class ModelConfig:
    input_channels: int = 9
    input_length: int = 128
    stem_channels: int = 16
    blocks: tuple[BneckSpec, ...] = DEFAULT_BLOCKS
    feature_dim: int = 96
    num_classes: int = 6
    dropout_rate: float = 0.5
    se_reduction: int = 4
    loss_alpha: float = 1.0
    loss_beta: float = 1.0
    enable_se: bool = True
    enable_swish: bool = True
    enable_mtl: bool = True
    task: Task = "both"
    backbone: Backbone = "mobilenet"
    plain_channels: int = 64
    plain_kernel: int = 5

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(
            b if isinstance(b, BneckSpec) else BneckSpec(**b) for b in self.blocks))
        if self.input_channels < 1 or self.input_length < 1:
            raise ConfigError("input_channels and input_length must be >= 1")
        if self.stem_channels < 1:
            raise ConfigError("stem_channels must be >= 1")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.feature_dim < 1:
            raise ConfigError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.se_reduction < 1:
            raise ConfigError(f"se_reduction must be >= 1, got {self.se_reduction}")
        if self.loss_alpha < 0 or self.loss_beta < 0 or self.loss_alpha + self.loss_beta <= 0:
            raise ConfigError("loss_alpha, loss_beta must be >= 0 with a positive sum")
        if self.task not in ("both", "activity", "resistance"):
            raise ConfigError(f"task must be both|activity|resistance, got {self.task!r}")
        if self.enable_mtl and self.task != "both":
            raise ConfigError("task must be 'both' when enable_mtl is true")
        if not self.enable_mtl and self.task == "both":
            raise ConfigError("enable_mtl=false needs task 'activity' or 'resistance'")
        if self.backbone not in ("mobilenet", "plain"):
            raise ConfigError(f"backbone must be mobilenet|plain, got {self.backbone!r}")
        if self.plain_channels < 1 or self.plain_kernel < 1 or self.plain_kernel % 2 == 0:
            raise ConfigError("plain_channels must be >= 1 and plain_kernel odd")
        if self.input_length < self.stride_product:
            raise ConfigError(
                f"input_length {self.input_length} shorter than total stride {self.stride_product}")

    @property
    def stride_product(self) -> int:
        strides = PLAIN_STRIDES if self.backbone == "plain" else [b.stride for b in self.blocks]
        return int(np.prod(strides, dtype=np.int64))

    @property
    def has_activity_head(self) -> bool:
        return self.task in ("both", "activity")

    @property
    def has_resistance_head(self) -> bool:
        return self.task in ("both", "resistance")

    def block_activation(self, spec: BneckSpec) -> str:
        return spec.activation if self.enable_swish else "relu"

    @property
    def activation(self) -> str:
        """Activation used by the stem, head and plain backbone."""
        return "swish" if self.enable_swish else "relu"

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["blocks"] = [asdict(b) for b in self.blocks]
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ModelConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config key: model.{unknown[0]}")
        d = {k: v for k, v in data.items() if v is not None}
        try:
            if "blocks" in d:
                d["blocks"] = tuple(BneckSpec(**b) if isinstance(b, dict) else b
                                    for b in d["blocks"])
            return cls(**d)
        except TypeError as e:
            raise ConfigError(f"invalid model config: {e}") from e
