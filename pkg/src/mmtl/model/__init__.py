"""MMTL-Net: a 1D depthwise-separable backbone with activity and resistance heads."""
from mmtl.model.config import DEFAULT_BLOCKS, BneckSpec, ModelConfig
from mmtl.model.flops import FlopsEstimate, flops_estimate, match_plain_width
from mmtl.model.losses import LossParts, cross_entropy, mse, mtl_loss
from mmtl.model.network import (
    ModelParams,
    Prediction,
    backward_batch,
    build_model,
    count_params,
    extract_features,
    forward_batch,
    predict,
    se_block,
)

__all__ = [
    "DEFAULT_BLOCKS", "BneckSpec", "FlopsEstimate", "LossParts", "ModelConfig", "ModelParams",
    "Prediction", "backward_batch", "build_model", "count_params", "cross_entropy",
    "extract_features", "flops_estimate", "forward_batch", "match_plain_width", "mse",
    "mtl_loss", "predict", "se_block",
]
