"""Multiply-add and parameter counts by walking layer shapes.

Deliberately independent of network.param_shapes so the two can check each
other.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from mmtl.model.config import PLAIN_STRIDES, ModelConfig
from mmtl.nn.kernels import conv_output_length, same_padding

# BN is a scale+shift per element, an activation is counted the same way.
_NORM_OPS = 2
_ACT_OPS = 2


@dataclass(frozen=True)
class FlopsEstimate:
    mul_adds: int
    param_count: int
    conv: int = 0
    norm_act: int = 0
    se: int = 0
    fc: int = 0

    def __iter__(self):
        return iter((self.mul_adds, self.param_count))

    @property
    def gflops(self) -> float:
        return self.mul_adds / 1e9


class _Walk:
    def __init__(self) -> None:
        self.conv = self.norm_act = self.se = self.fc = 0
        self.params = 0

    def bn(self, channels: int, t: int, act: bool = True) -> None:
        self.norm_act += (_NORM_OPS + (_ACT_OPS if act else 0)) * channels * t
        self.params += 4 * channels

    def pointwise(self, c_in: int, c_out: int, t: int) -> None:
        self.conv += c_in * c_out * t
        self.params += c_in * c_out

    def dense(self, d_in: int, d_out: int) -> None:
        self.fc += d_in * d_out
        self.params += d_in * d_out + d_out


def flops_estimate(config: ModelConfig) -> FlopsEstimate:
    w = _Walk()
    t = config.input_length
    if config.backbone == "plain":
        c_in = config.input_channels
        k = config.plain_kernel
        for width, stride in zip((config.plain_channels, config.plain_channels, config.feature_dim),
                                 PLAIN_STRIDES):
            t = conv_output_length(t, k, stride, same_padding(k))
            w.conv += c_in * width * k * t
            w.params += c_in * width * k
            w.bn(width, t)
            c_in = width
    else:
        w.pointwise(config.input_channels, config.stem_channels, t)
        w.bn(config.stem_channels, t)
        c_in = config.stem_channels
        for spec in config.blocks:
            e = spec.expand_channels
            w.pointwise(c_in, e, t)
            w.bn(e, t)
            t = conv_output_length(t, spec.kernel_size, spec.stride, same_padding(spec.kernel_size))
            w.conv += e * spec.kernel_size * t
            w.params += e * spec.kernel_size
            w.bn(e, t)
            if config.enable_se and spec.use_se:
                r = max(1, e // config.se_reduction)
                w.se += 2 * e * r
                w.params += 2 * e * r + r + e
            w.pointwise(e, spec.out_channels, t)
            w.bn(spec.out_channels, t, act=False)
            c_in = spec.out_channels
        w.pointwise(c_in, config.feature_dim, t)
        w.bn(config.feature_dim, t)
    if config.has_activity_head:
        w.dense(config.feature_dim, config.num_classes)
    if config.has_resistance_head:
        w.dense(config.feature_dim, 1)
    total = w.conv + w.norm_act + w.se + w.fc
    return FlopsEstimate(total, w.params, w.conv, w.norm_act, w.se, w.fc)


def match_plain_width(config: ModelConfig, max_width: int = 1024) -> int:
    """Plain-backbone width whose parameter count is closest to the MobileNet model's."""
    target = flops_estimate(replace(config, backbone="mobilenet")).param_count
    best, best_gap = 1, None
    for width in range(1, max_width + 1):
        count = flops_estimate(replace(config, backbone="plain", plain_channels=width)).param_count
        gap = abs(count - target)
        if best_gap is None or gap < best_gap:
            best, best_gap = width, gap
        if count > target:
            break
    return best
