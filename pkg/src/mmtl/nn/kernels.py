"""Numeric kernels: forward passes and analytical gradients.

Every function here is pure. Tensors are numpy arrays; feature maps are
[channels, time], batches are [batch, channels, time]. Kernels keep the
floating dtype of their input (the model runs float32) and accumulate
reductions in float64.

Each kernel exists in two forms: `op(...)` returns the output, `op_fwd(...)`
also returns a ForwardCache that `backward(cache, upstream)` consumes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from mmtl.errors import KernelError, NonFiniteError, ShapeError

Mode = Literal["train", "eval"]
ActivationKind = Literal["swish", "sigmoid", "relu", "identity"]

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.1
ACTIVATIONS = ("swish", "sigmoid", "relu", "identity")


@dataclass(frozen=True)
class LayerGrads:
    """Gradients of one kernel call: w.r.t. its input and each named parameter."""
    input_grad: np.ndarray
    param_grads: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class ForwardCache:
    op: str
    inputs: dict[str, Any]
    output_shape: tuple[int, ...]
    attrs: dict[str, Any] = field(default_factory=dict)
    saved: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class BatchNormState:
    """Per-channel affine parameters and running statistics."""
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    epsilon: float = BN_EPSILON

    def __post_init__(self) -> None:
        n = self.gamma.shape
        for name in ("beta", "running_mean", "running_var"):
            if getattr(self, name).shape != n or len(n) != 1:
                raise ShapeError(f"batch norm {name} shape {getattr(self, name).shape} != gamma {n}")
        if self.epsilon <= 0:
            raise KernelError(f"batch norm epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.momentum < 1:
            raise KernelError(f"batch norm momentum must be in (0, 1), got {self.momentum}")
        if np.any(self.running_var < 0):
            raise KernelError("batch norm running_var has negative entries")

    @property
    def channels(self) -> int:
        return int(self.gamma.shape[0])

    @classmethod
    def fresh(cls, channels: int, dtype=np.float32) -> BatchNormState:
        return cls(
            gamma=np.ones(channels, dtype=dtype),
            beta=np.zeros(channels, dtype=dtype),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
        )


# ── helpers ─────────────────────────────────────────────────────────────────

def _as_batch(x: np.ndarray, op: str) -> tuple[np.ndarray, bool]:
    """Lift [C, T] to [1, C, T]. Returns (batched, was_unbatched)."""
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"{op}: expected [C, T] or [B, C, T], got shape {x.shape}")


def _finite(out: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(out).all():
        raise NonFiniteError(f"{op} produced NaN/Inf")
    return out


def _float_dtype(*arrays: np.ndarray) -> np.dtype:
    dt = np.result_type(*arrays)
    return dt if np.issubdtype(dt, np.floating) else np.dtype(np.float32)


def _scatter_windows(dwin: np.ndarray, padded_len: int, stride: int) -> np.ndarray:
    """Adjoint of sliding_window_view(..., K)[..., ::stride, :] on the last axis."""
    b, c, t_out, k = dwin.shape
    dxp = np.zeros((b, c, padded_len), dtype=dwin.dtype)
    span = stride * (t_out - 1) + 1
    for j in range(k):
        dxp[:, :, j:j + span:stride] += dwin[..., j]
    return dxp


def conv_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def same_padding(kernel: int) -> int:
    return kernel // 2


# ── depthwise convolution ───────────────────────────────────────────────────

def conv1d_depthwise_fwd(x: np.ndarray, kernels: np.ndarray, stride: int = 1,
                         padding: int = 0) -> tuple[np.ndarray, ForwardCache]:
    xb, unbatched = _as_batch(x, "conv1d_depthwise")
    if kernels.ndim != 2 or kernels.shape[0] != xb.shape[1]:
        raise ShapeError(f"conv1d_depthwise: kernels {kernels.shape} vs {xb.shape[1]} channels")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv1d_depthwise: stride={stride} padding={padding}")
    k = kernels.shape[1]
    t = xb.shape[2]
    if k > t + 2 * padding:
        raise ShapeError(f"conv1d_depthwise: kernel {k} longer than padded length {t + 2 * padding}")
    dt = _float_dtype(xb, kernels)
    xp = np.pad(xb, ((0, 0), (0, 0), (padding, padding))).astype(dt, copy=False)
    win = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    out = np.einsum("bctk,ck->bct", win, kernels.astype(dt, copy=False))
    _finite(out, "conv1d_depthwise")
    if unbatched:
        out = out[0]
    cache = ForwardCache("conv1d_depthwise", {"x": x, "kernels": kernels}, out.shape,
                         attrs={"stride": stride, "padding": padding, "unbatched": unbatched},
                         saved={"xp": xp})
    return out, cache


def conv1d_depthwise(x: np.ndarray, kernels: np.ndarray, stride: int = 1,
                     padding: int = 0) -> np.ndarray:
    """Per-channel convolution: channel i of the output reads only channel i."""
    return conv1d_depthwise_fwd(x, kernels, stride, padding)[0]


def _conv1d_depthwise_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    stride, padding = cache.attrs["stride"], cache.attrs["padding"]
    kernels = cache.inputs["kernels"]
    xp = cache.saved["xp"]
    gb = g[None] if cache.attrs["unbatched"] else g
    k = kernels.shape[1]
    win = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    dk = np.einsum("bctk,bct->ck", win, gb)
    dwin = gb[..., None] * kernels[None, :, None, :]
    dxp = _scatter_windows(dwin, xp.shape[2], stride)
    t = xp.shape[2] - 2 * padding
    dx = dxp[:, :, padding:padding + t]
    if cache.attrs["unbatched"]:
        dx = dx[0]
    return LayerGrads(dx, {"kernels": dk})


# ── standard convolution (plain backbone) ───────────────────────────────────

def conv1d_fwd(x: np.ndarray, weights: np.ndarray, stride: int = 1,
               padding: int = 0) -> tuple[np.ndarray, ForwardCache]:
    xb, unbatched = _as_batch(x, "conv1d")
    if weights.ndim != 3 or weights.shape[1] != xb.shape[1]:
        raise ShapeError(f"conv1d: weights {weights.shape} vs {xb.shape[1]} input channels")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv1d: stride={stride} padding={padding}")
    k = weights.shape[2]
    if k > xb.shape[2] + 2 * padding:
        raise ShapeError(f"conv1d: kernel {k} longer than padded length")
    dt = _float_dtype(xb, weights)
    xp = np.pad(xb, ((0, 0), (0, 0), (padding, padding))).astype(dt, copy=False)
    win = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    out = np.einsum("bctk,ock->bot", win, weights.astype(dt, copy=False), optimize=True)
    _finite(out, "conv1d")
    if unbatched:
        out = out[0]
    cache = ForwardCache("conv1d", {"x": x, "weights": weights}, out.shape,
                         attrs={"stride": stride, "padding": padding, "unbatched": unbatched},
                         saved={"xp": xp})
    return out, cache


def conv1d(x: np.ndarray, weights: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    return conv1d_fwd(x, weights, stride, padding)[0]


def _conv1d_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    stride, padding = cache.attrs["stride"], cache.attrs["padding"]
    w = cache.inputs["weights"]
    xp = cache.saved["xp"]
    gb = g[None] if cache.attrs["unbatched"] else g
    win = sliding_window_view(xp, w.shape[2], axis=2)[:, :, ::stride, :]
    dw = np.einsum("bctk,bot->ock", win, gb, optimize=True)
    dwin = np.einsum("bot,ock->bctk", gb, w, optimize=True)
    dxp = _scatter_windows(dwin, xp.shape[2], stride)
    t = xp.shape[2] - 2 * padding
    dx = dxp[:, :, padding:padding + t]
    if cache.attrs["unbatched"]:
        dx = dx[0]
    return LayerGrads(dx, {"weights": dw})


# ── pointwise convolution ───────────────────────────────────────────────────

def conv1d_pointwise_fwd(x: np.ndarray, weights: np.ndarray,
                         bias: np.ndarray | None = None) -> tuple[np.ndarray, ForwardCache]:
    xb, unbatched = _as_batch(x, "conv1d_pointwise")
    if weights.ndim != 2 or weights.shape[1] != xb.shape[1]:
        raise ShapeError(f"conv1d_pointwise: weights {weights.shape} vs {xb.shape[1]} channels")
    if bias is not None and bias.shape != (weights.shape[0],):
        raise ShapeError(f"conv1d_pointwise: bias {bias.shape} vs {weights.shape[0]} outputs")
    out = np.matmul(weights, xb)
    if bias is not None:
        out = out + bias[None, :, None]
    _finite(out, "conv1d_pointwise")
    if unbatched:
        out = out[0]
    inputs = {"x": x, "weights": weights}
    if bias is not None:
        inputs["bias"] = bias
    return out, ForwardCache("conv1d_pointwise", inputs, out.shape, attrs={"unbatched": unbatched})


def conv1d_pointwise(x: np.ndarray, weights: np.ndarray,
                     bias: np.ndarray | None = None) -> np.ndarray:
    """1x1 convolution: every timestep is mixed across channels by `weights`."""
    return conv1d_pointwise_fwd(x, weights, bias)[0]


def _conv1d_pointwise_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    unbatched = cache.attrs["unbatched"]
    x = cache.inputs["x"][None] if unbatched else cache.inputs["x"]
    w = cache.inputs["weights"]
    gb = g[None] if unbatched else g
    dw = np.einsum("bot,bct->oc", gb, x, optimize=True)
    dx = np.matmul(w.T, gb)
    grads = {"weights": dw}
    if "bias" in cache.inputs:
        grads["bias"] = gb.sum(axis=(0, 2))
    return LayerGrads(dx[0] if unbatched else dx, grads)


# ── batch normalization ─────────────────────────────────────────────────────

def batch_norm_fwd(x: np.ndarray, state: BatchNormState,
                   mode: Mode) -> tuple[np.ndarray, BatchNormState, ForwardCache]:
    xb, unbatched = _as_batch(x, "batch_norm")
    if xb.shape[1] != state.channels:
        raise ShapeError(f"batch_norm: {xb.shape[1]} channels vs state {state.channels}")
    if state.epsilon <= 0:
        raise KernelError("batch_norm: epsilon must be > 0")
    x64 = xb.astype(np.float64)
    if mode == "train":
        mean = x64.mean(axis=(0, 2))
        var = x64.var(axis=(0, 2))
        m = state.momentum
        new_state = replace(
            state,
            running_mean=((1 - m) * state.running_mean + m * mean).astype(state.running_mean.dtype),
            running_var=((1 - m) * state.running_var + m * var).astype(state.running_var.dtype),
        )
    elif mode == "eval":
        mean = state.running_mean.astype(np.float64)
        var = state.running_var.astype(np.float64)
        new_state = state
    else:
        raise KernelError(f"batch_norm: unknown mode {mode!r}")
    inv_std = 1.0 / np.sqrt(var + state.epsilon)
    x_hat = (x64 - mean[None, :, None]) * inv_std[None, :, None]
    y = state.gamma[None, :, None] * x_hat + state.beta[None, :, None]
    y = _finite(y.astype(_float_dtype(xb)), "batch_norm")
    if unbatched:
        y = y[0]
    cache = ForwardCache("batch_norm", {"x": x, "gamma": state.gamma, "beta": state.beta},
                         y.shape, attrs={"mode": mode, "unbatched": unbatched},
                         saved={"x_hat": x_hat, "inv_std": inv_std})
    return y, new_state, cache


def batch_norm(x: np.ndarray, state: BatchNormState,
               mode: Mode) -> tuple[np.ndarray, BatchNormState]:
    """Normalize per channel over (batch, time). Returns output and updated state."""
    y, new_state, _ = batch_norm_fwd(x, state, mode)
    return y, new_state


def _batch_norm_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    unbatched = cache.attrs["unbatched"]
    gb = (g[None] if unbatched else g).astype(np.float64)
    x_hat, inv_std = cache.saved["x_hat"], cache.saved["inv_std"]
    gamma = cache.inputs["gamma"].astype(np.float64)
    dgamma = (gb * x_hat).sum(axis=(0, 2))
    dbeta = gb.sum(axis=(0, 2))
    dx_hat = gb * gamma[None, :, None]
    if cache.attrs["mode"] == "train":
        n = gb.shape[0] * gb.shape[2]
        s1 = dx_hat.sum(axis=(0, 2), keepdims=True)
        s2 = (dx_hat * x_hat).sum(axis=(0, 2), keepdims=True)
        dx = inv_std[None, :, None] / n * (n * dx_hat - s1 - x_hat * s2)
    else:
        dx = dx_hat * inv_std[None, :, None]
    dt = _float_dtype(cache.inputs["x"])
    dx = dx.astype(dt)
    pdt = cache.inputs["gamma"].dtype
    return LayerGrads(dx[0] if unbatched else dx,
                      {"gamma": dgamma.astype(pdt), "beta": dbeta.astype(pdt)})


# ── activations ─────────────────────────────────────────────────────────────

def activation_fwd(x: np.ndarray, kind: ActivationKind) -> tuple[np.ndarray, ForwardCache]:
    saved: dict[str, Any] = {}
    if kind == "swish":
        s = expit(x)
        y = x * s
        saved["s"] = s
    elif kind == "sigmoid":
        y = expit(x)
        saved["s"] = y
    elif kind == "relu":
        y = np.maximum(x, 0)
    elif kind == "identity":
        y = x
    else:
        raise KernelError(f"unknown activation {kind!r}")
    _finite(y, f"activation[{kind}]")
    return y, ForwardCache("activation", {"x": x}, y.shape, attrs={"kind": kind}, saved=saved)


def activation(x: np.ndarray, kind: ActivationKind) -> np.ndarray:
    return activation_fwd(x, kind)[0]


def _activation_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    kind = cache.attrs["kind"]
    x = cache.inputs["x"]
    if kind == "swish":
        s = cache.saved["s"]
        dx = g * (s + x * s * (1 - s))
    elif kind == "sigmoid":
        s = cache.saved["s"]
        dx = g * s * (1 - s)
    elif kind == "relu":
        dx = g * (x > 0)
    else:
        dx = g
    return LayerGrads(dx.astype(_float_dtype(x, g)))


# ── pooling, dense, softmax, dropout ────────────────────────────────────────

def global_avg_pool_fwd(x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    if x.ndim not in (2, 3):
        raise ShapeError(f"global_avg_pool: expected rank 2 or 3, got {x.shape}")
    t = x.shape[-1]
    if t == 0:
        raise ShapeError("global_avg_pool: empty time axis")
    out = x.mean(axis=-1, dtype=np.float64).astype(_float_dtype(x))
    return out, ForwardCache("global_avg_pool", {"x": x}, out.shape, attrs={"t": t})


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Mean over time: [C, T] -> [C], [B, C, T] -> [B, C]."""
    return global_avg_pool_fwd(x)[0]


def _global_avg_pool_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    t = cache.attrs["t"]
    dx = np.repeat(g[..., None] / t, t, axis=-1)
    return LayerGrads(dx.astype(_float_dtype(cache.inputs["x"])))


def fully_connected_fwd(x: np.ndarray, weights: np.ndarray,
                        bias: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    if x.ndim not in (1, 2):
        raise ShapeError(f"fully_connected: expected [D] or [B, D], got {x.shape}")
    if weights.ndim != 2 or weights.shape[1] != x.shape[-1] or bias.shape != (weights.shape[0],):
        raise ShapeError(f"fully_connected: x {x.shape}, W {weights.shape}, b {bias.shape}")
    out = _finite(x @ weights.T + bias, "fully_connected")
    return out, ForwardCache("fully_connected", {"x": x, "weights": weights, "bias": bias}, out.shape)


def fully_connected(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return fully_connected_fwd(x, weights, bias)[0]


def _fully_connected_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    x, w = cache.inputs["x"], cache.inputs["weights"]
    if x.ndim == 1:
        dw = np.outer(g, x)
        db = g
    else:
        dw = g.T @ x
        db = g.sum(axis=0)
    return LayerGrads(g @ w, {"weights": dw, "bias": db})


def softmax_fwd(logits: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    if logits.ndim not in (1, 2) or logits.shape[-1] < 1:
        raise ShapeError(f"softmax: expected [C] or [B, C] with C >= 1, got {logits.shape}")
    z = logits.astype(np.float64) - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = (e / e.sum(axis=-1, keepdims=True)).astype(_float_dtype(logits))
    return p, ForwardCache("softmax", {"logits": logits}, p.shape, saved={"p": p})


def softmax(logits: np.ndarray) -> np.ndarray:
    return softmax_fwd(logits)[0]


def _softmax_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    p = cache.saved["p"]
    return LayerGrads(p * (g - (g * p).sum(axis=-1, keepdims=True)))


def dropout_fwd(x: np.ndarray, rate: float, mode: Mode,
                rng: np.random.Generator | None) -> tuple[np.ndarray, ForwardCache]:
    if not 0 <= rate < 1:
        raise KernelError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0:
        return x, ForwardCache("dropout", {"x": x}, x.shape, saved={"mask": None})
    if rng is None:
        raise KernelError("dropout in train mode needs a seeded generator")
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1 - rate)
    y = x * mask
    return y, ForwardCache("dropout", {"x": x}, y.shape, saved={"mask": mask})


def dropout(x: np.ndarray, rate: float, mode: Mode,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Inverted dropout: survivors are scaled by 1/(1-rate) at train time."""
    return dropout_fwd(x, rate, mode, rng)[0]


def _dropout_bwd(cache: ForwardCache, g: np.ndarray) -> LayerGrads:
    mask = cache.saved["mask"]
    return LayerGrads(g if mask is None else g * mask)


# ── backward dispatch ───────────────────────────────────────────────────────

_BACKWARD: dict[str, Callable[[ForwardCache, np.ndarray], LayerGrads]] = {
    "conv1d_depthwise": _conv1d_depthwise_bwd,
    "conv1d": _conv1d_bwd,
    "conv1d_pointwise": _conv1d_pointwise_bwd,
    "batch_norm": _batch_norm_bwd,
    "activation": _activation_bwd,
    "global_avg_pool": _global_avg_pool_bwd,
    "fully_connected": _fully_connected_bwd,
    "softmax": _softmax_bwd,
    "dropout": _dropout_bwd,
}


def backward(cache: ForwardCache | None, upstream: np.ndarray) -> LayerGrads:
    """Analytical gradients of the cached kernel call given d(loss)/d(output)."""
    if cache is None:
        raise KernelError("backward called without a forward cache")
    if tuple(upstream.shape) != tuple(cache.output_shape):
        raise ShapeError(f"{cache.op} backward: upstream {upstream.shape} vs output {cache.output_shape}")
    return _BACKWARD[cache.op](cache, upstream)
