"""The multi-task network: backbone, squeeze-excitation, activity and resistance heads.

Parameters live in a flat name -> ndarray map (ModelParams). Forward passes
never mutate it: train-mode batch-norm statistics come back in
ForwardResult.bn_updates and the trainer decides whether to apply them.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from mmtl.errors import ShapeError
from mmtl.log import get_logger
from mmtl.model.config import PLAIN_STRIDES, BneckSpec, ModelConfig
from mmtl.nn import kernels as K
from mmtl.nn.kernels import BatchNormState, ForwardCache, Mode, same_padding

log = get_logger("model")

ModelParams = dict[str, np.ndarray]

_BN_FIELDS = ("gamma", "beta", "running_mean", "running_var")


@dataclass(frozen=True)
class Prediction:
    activity_probs: np.ndarray | None
    resistance: float | None

    @property
    def activity(self) -> int | None:
        if self.activity_probs is None:
            return None
        return int(np.argmax(self.activity_probs))

    @property
    def reported_resistance(self) -> float | None:
        """Resistance clamped to [0, 1] for reports; the loss sees the raw value."""
        if self.resistance is None:
            return None
        return float(min(max(self.resistance, 0.0), 1.0))


# ── parameter layout and initialization ─────────────────────────────────────

def se_channels(channels: int, reduction: int) -> int:
    return max(1, channels // reduction)


def plain_widths(config: ModelConfig) -> tuple[int, ...]:
    return (config.plain_channels, config.plain_channels, config.feature_dim)


def _bn_shapes(prefix: str, channels: int) -> dict[str, tuple[int, ...]]:
    return {f"{prefix}.{f}": (channels,) for f in _BN_FIELDS}


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Every tensor name the config allocates, in a stable order."""
    shapes: dict[str, tuple[int, ...]] = {}
    if config.backbone == "plain":
        c_in = config.input_channels
        for j, width in enumerate(plain_widths(config)):
            shapes[f"plain.{j}.conv.weight"] = (width, c_in, config.plain_kernel)
            shapes.update(_bn_shapes(f"plain.{j}.bn", width))
            c_in = width
    else:
        shapes["stem.conv.weight"] = (config.stem_channels, config.input_channels)
        shapes.update(_bn_shapes("stem.bn", config.stem_channels))
        c_in = config.stem_channels
        for i, spec in enumerate(config.blocks):
            p = f"blocks.{i}"
            e = spec.expand_channels
            shapes[f"{p}.expand.weight"] = (e, c_in)
            shapes.update(_bn_shapes(f"{p}.expand.bn", e))
            shapes[f"{p}.depthwise.weight"] = (e, spec.kernel_size)
            shapes.update(_bn_shapes(f"{p}.depthwise.bn", e))
            if config.enable_se and spec.use_se:
                r = se_channels(e, config.se_reduction)
                shapes[f"{p}.se.squeeze.weight"] = (r, e)
                shapes[f"{p}.se.squeeze.bias"] = (r,)
                shapes[f"{p}.se.excite.weight"] = (e, r)
                shapes[f"{p}.se.excite.bias"] = (e,)
            shapes[f"{p}.project.weight"] = (spec.out_channels, e)
            shapes.update(_bn_shapes(f"{p}.project.bn", spec.out_channels))
            c_in = spec.out_channels
        shapes["head.conv.weight"] = (config.feature_dim, c_in)
        shapes.update(_bn_shapes("head.bn", config.feature_dim))
    if config.has_activity_head:
        shapes["activity.weight"] = (config.num_classes, config.feature_dim)
        shapes["activity.bias"] = (config.num_classes,)
    if config.has_resistance_head:
        shapes["resistance.weight"] = (1, config.feature_dim)
        shapes["resistance.bias"] = (1,)
    return shapes


def init_tensor(name: str, shape: tuple[int, ...], seed: int) -> np.ndarray:
    """He-uniform weights, zero biases/beta/running mean, unit gamma/running var."""
    if name.endswith(".weight"):
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt(6.0 / fan_in)
        rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
        return rng.uniform(-bound, bound, size=shape).astype(np.float32)
    if name.endswith((".gamma", ".running_var")):
        return np.ones(shape, dtype=np.float32)
    return np.zeros(shape, dtype=np.float32)


def build_model(config: ModelConfig, seed: int) -> ModelParams:
    params = {name: init_tensor(name, shape, seed) for name, shape in param_shapes(config).items()}
    log.debug("built %s model: %d tensors, %d values", config.backbone, len(params), count_params(params))
    return params


def count_params(params: ModelParams) -> int:
    return int(sum(v.size for v in params.values()))


def is_trainable(name: str) -> bool:
    return not name.endswith((".running_mean", ".running_var"))


def is_decayed(name: str) -> bool:
    """Only conv/FC weights take weight decay; biases and BN affine terms do not."""
    return name.endswith(".weight")


def is_head(name: str) -> bool:
    return name.startswith(("activity.", "resistance."))


# ── recorded forward segments ───────────────────────────────────────────────

class _Tape:
    """Sequential record of kernel caches and the model tensors each one read."""

    def __init__(self, enabled: bool) -> None:
        self.enabled = enabled
        self.entries: list[tuple[ForwardCache, dict[str, str]]] = []

    def push(self, cache: ForwardCache, names: dict[str, str] | None = None) -> None:
        if self.enabled:
            self.entries.append((cache, names or {}))

    def backprop(self, g: np.ndarray, grads: ModelParams) -> np.ndarray:
        for cache, names in reversed(self.entries):
            lg = K.backward(cache, g)
            for local, full in names.items():
                pg = lg.param_grads[local]
                grads[full] = grads[full] + pg if full in grads else pg
            g = lg.input_grad
        return g


@dataclass
class _SETrace:
    gate: _Tape
    x: np.ndarray
    g: np.ndarray

    def backprop(self, dy: np.ndarray, grads: ModelParams) -> np.ndarray:
        dx = dy * self.g[..., None]
        dg = (dy * self.x).sum(axis=-1)
        return dx + self.gate.backprop(dg, grads)


@dataclass
class _BlockTrace:
    main: _Tape
    se: _SETrace | None
    project: _Tape
    residual: bool

    def backprop(self, dy: np.ndarray, grads: ModelParams) -> np.ndarray:
        dh = self.project.backprop(dy, grads)
        if self.se is not None:
            dh = self.se.backprop(dh, grads)
        dx = self.main.backprop(dh, grads)
        return dx + dy if self.residual else dx


_Segment = Union[_Tape, _BlockTrace]


@dataclass
class ForwardResult:
    probs: np.ndarray | None          # [B, num_classes]
    resistance: np.ndarray | None     # [B], raw
    features: np.ndarray              # [B, feature_dim]
    bn_updates: dict[str, BatchNormState] = field(default_factory=dict)
    segments: list[_Segment] = field(default_factory=list)
    dropout_tape: _Tape | None = None
    activity_tape: _Tape | None = None
    resistance_tape: _Tape | None = None


def _bn_state(params: ModelParams, prefix: str) -> BatchNormState:
    return BatchNormState(*(params[f"{prefix}.{f}"] for f in _BN_FIELDS))


def _bn_act(h: np.ndarray, params: ModelParams, prefix: str, act: str | None, mode: Mode,
            updates: dict[str, BatchNormState], tape: _Tape) -> np.ndarray:
    y, state, cache = K.batch_norm_fwd(h, _bn_state(params, prefix), mode)
    tape.push(cache, {"gamma": f"{prefix}.gamma", "beta": f"{prefix}.beta"})
    if mode == "train":
        updates[prefix] = state
    if act is not None:
        y, cache = K.activation_fwd(y, act)
        tape.push(cache)
    return y


def _se_forward(x: np.ndarray, tensors: tuple[np.ndarray, ...], names: tuple[str, ...],
                record: bool) -> tuple[np.ndarray, _SETrace]:
    w_sq, b_sq, w_ex, b_ex = tensors
    gate = _Tape(record)
    pooled, c = K.global_avg_pool_fwd(x)
    gate.push(c)
    z, c = K.fully_connected_fwd(pooled, w_sq, b_sq)
    gate.push(c, {"weights": names[0], "bias": names[1]})
    z, c = K.activation_fwd(z, "relu")
    gate.push(c)
    z, c = K.fully_connected_fwd(z, w_ex, b_ex)
    gate.push(c, {"weights": names[2], "bias": names[3]})
    g, c = K.activation_fwd(z, "sigmoid")
    gate.push(c)
    return x * g[..., None], _SETrace(gate, x, g)


def se_block(x: np.ndarray, w_sq: np.ndarray, b_sq: np.ndarray,
             w_ex: np.ndarray, b_ex: np.ndarray) -> np.ndarray:
    """Squeeze-excitation: rescale each channel by a learned gate in (0, 1)."""
    if x.ndim not in (2, 3):
        raise ShapeError(f"se_block: expected [C, T] or [B, C, T], got {x.shape}")
    c = x.shape[-2]
    if w_sq.ndim != 2 or w_sq.shape[1] != c or w_ex.shape != (c, w_sq.shape[0]):
        raise ShapeError(f"se_block: W_sq {w_sq.shape}, W_ex {w_ex.shape} vs {c} channels")
    y, _ = _se_forward(x, (w_sq, b_sq, w_ex, b_ex), ("w_sq", "b_sq", "w_ex", "b_ex"), False)
    return y


def _block_forward(x: np.ndarray, params: ModelParams, i: int, spec: BneckSpec, in_ch: int,
                   config: ModelConfig, mode: Mode, updates: dict[str, BatchNormState],
                   record: bool) -> tuple[np.ndarray, _BlockTrace]:
    p = f"blocks.{i}"
    act = config.block_activation(spec)
    main = _Tape(record)
    h, c = K.conv1d_pointwise_fwd(x, params[f"{p}.expand.weight"])
    main.push(c, {"weights": f"{p}.expand.weight"})
    h = _bn_act(h, params, f"{p}.expand.bn", act, mode, updates, main)
    h, c = K.conv1d_depthwise_fwd(h, params[f"{p}.depthwise.weight"], spec.stride,
                                  same_padding(spec.kernel_size))
    main.push(c, {"kernels": f"{p}.depthwise.weight"})
    h = _bn_act(h, params, f"{p}.depthwise.bn", act, mode, updates, main)
    se = None
    if config.enable_se and spec.use_se:
        names = (f"{p}.se.squeeze.weight", f"{p}.se.squeeze.bias",
                 f"{p}.se.excite.weight", f"{p}.se.excite.bias")
        h, se = _se_forward(h, tuple(params[n] for n in names), names, record)
    project = _Tape(record)
    y, c = K.conv1d_pointwise_fwd(h, params[f"{p}.project.weight"])
    project.push(c, {"weights": f"{p}.project.weight"})
    y = _bn_act(y, params, f"{p}.project.bn", None, mode, updates, project)
    residual = spec.stride == 1 and in_ch == spec.out_channels
    if residual:
        y = y + x
    return y, _BlockTrace(main, se, project, residual)


def _backbone_forward(x: np.ndarray, params: ModelParams, config: ModelConfig, mode: Mode,
                      updates: dict[str, BatchNormState],
                      record: bool) -> tuple[np.ndarray, list[_Segment]]:
    act = config.activation
    segments: list[_Segment] = []
    if config.backbone == "plain":
        tape = _Tape(record)
        h = x
        for j, stride in enumerate(PLAIN_STRIDES):
            name = f"plain.{j}.conv.weight"
            h, c = K.conv1d_fwd(h, params[name], stride, same_padding(config.plain_kernel))
            tape.push(c, {"weights": name})
            h = _bn_act(h, params, f"plain.{j}.bn", act, mode, updates, tape)
        f, c = K.global_avg_pool_fwd(h)
        tape.push(c)
        segments.append(tape)
        return f, segments

    stem = _Tape(record)
    h, c = K.conv1d_pointwise_fwd(x, params["stem.conv.weight"])
    stem.push(c, {"weights": "stem.conv.weight"})
    h = _bn_act(h, params, "stem.bn", act, mode, updates, stem)
    segments.append(stem)
    in_ch = config.stem_channels
    for i, spec in enumerate(config.blocks):
        h, trace = _block_forward(h, params, i, spec, in_ch, config, mode, updates, record)
        segments.append(trace)
        in_ch = spec.out_channels
    head = _Tape(record)
    h, c = K.conv1d_pointwise_fwd(h, params["head.conv.weight"])
    head.push(c, {"weights": "head.conv.weight"})
    h = _bn_act(h, params, "head.bn", act, mode, updates, head)
    f, c = K.global_avg_pool_fwd(h)
    head.push(c)
    segments.append(head)
    return f, segments


def _check_input(x: np.ndarray, config: ModelConfig) -> None:
    if x.ndim != 3 or x.shape[1] != config.input_channels:
        raise ShapeError(
            f"expected input [B, {config.input_channels}, T], got {x.shape}")
    if x.shape[2] < config.stride_product:
        raise ShapeError(f"window length {x.shape[2]} shorter than total stride {config.stride_product}")


def forward_batch(x: np.ndarray, params: ModelParams, config: ModelConfig, mode: Mode = "eval",
                  rng: np.random.Generator | None = None, record: bool = False) -> ForwardResult:
    """Batched forward [B, C, T] -> probabilities, raw resistance and features."""
    _check_input(x, config)
    updates: dict[str, BatchNormState] = {}
    features, segments = _backbone_forward(x, params, config, mode, updates, record)
    drop_tape = _Tape(record)
    f, c = K.dropout_fwd(features, config.dropout_rate, mode, rng)
    drop_tape.push(c)
    probs = resistance = None
    act_tape = res_tape = None
    if config.has_activity_head:
        act_tape = _Tape(record)
        logits, c = K.fully_connected_fwd(f, params["activity.weight"], params["activity.bias"])
        act_tape.push(c, {"weights": "activity.weight", "bias": "activity.bias"})
        probs = K.softmax(logits)
    if config.has_resistance_head:
        res_tape = _Tape(record)
        r, c = K.fully_connected_fwd(f, params["resistance.weight"], params["resistance.bias"])
        res_tape.push(c, {"weights": "resistance.weight", "bias": "resistance.bias"})
        resistance = r[:, 0]
    return ForwardResult(probs, resistance, features, updates, segments,
                         drop_tape, act_tape, res_tape)


def backward_batch(result: ForwardResult, d_logits: np.ndarray | None,
                   d_resistance: np.ndarray | None) -> ModelParams:
    """Gradients of the loss w.r.t. every parameter the recorded forward read.

    `d_logits` is d(loss)/d(activity logits) [B, K]; `d_resistance` is
    d(loss)/d(raw resistance) [B].
    """
    if result.dropout_tape is None or not result.dropout_tape.enabled:
        raise ShapeError("backward_batch needs a forward run with record=True")
    grads: ModelParams = {}
    df = np.zeros_like(result.features)
    if result.activity_tape is not None and d_logits is not None:
        df = df + result.activity_tape.backprop(d_logits.astype(df.dtype), grads)
    if result.resistance_tape is not None and d_resistance is not None:
        df = df + result.resistance_tape.backprop(d_resistance.astype(df.dtype)[:, None], grads)
    g = result.dropout_tape.backprop(df, grads)
    for segment in reversed(result.segments):
        g = segment.backprop(g, grads)
    return grads


def apply_bn_updates(params: ModelParams, updates: dict[str, BatchNormState]) -> ModelParams:
    out = dict(params)
    for prefix, state in updates.items():
        out[f"{prefix}.running_mean"] = state.running_mean
        out[f"{prefix}.running_var"] = state.running_var
    return out


def extract_features(window: np.ndarray, params: ModelParams, config: ModelConfig,
                     mode: Mode = "eval") -> np.ndarray:
    """Backbone only: [C, T] window -> feature vector F [feature_dim]."""
    if window.ndim != 2:
        raise ShapeError(f"expected a [C, T] window, got {window.shape}")
    x = window[None]
    _check_input(x, config)
    features, _ = _backbone_forward(x, params, config, mode, {}, False)
    return features[0]


def predict(window: np.ndarray, params: ModelParams, config: ModelConfig, mode: Mode = "eval",
            dropout_rng: np.random.Generator | None = None) -> Prediction:
    if window.ndim != 2:
        raise ShapeError(f"expected a [C, T] window, got {window.shape}")
    res = forward_batch(window[None], params, config, mode, dropout_rng)
    return Prediction(
        activity_probs=None if res.probs is None else res.probs[0],
        resistance=None if res.resistance is None else float(res.resistance[0]),
    )
