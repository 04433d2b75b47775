"""Pure numeric kernels with analytical backward passes."""
from mmtl.nn.kernels import (
    BatchNormState,
    ForwardCache,
    LayerGrads,
    activation,
    backward,
    batch_norm,
    conv1d,
    conv1d_depthwise,
    conv1d_pointwise,
    dropout,
    fully_connected,
    global_avg_pool,
    softmax,
)

__all__ = [
    "BatchNormState", "ForwardCache", "LayerGrads", "activation", "backward", "batch_norm",
    "conv1d", "conv1d_depthwise", "conv1d_pointwise", "dropout", "fully_connected",
    "global_avg_pool", "softmax",
]
