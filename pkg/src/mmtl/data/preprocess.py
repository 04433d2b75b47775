"""Denoising, z-score normalization and sliding-window segmentation."""
from __future__ import annotations

from dataclasses import replace
from typing import Iterable

import numpy as np
from scipy.ndimage import median_filter

from mmtl.data.types import LabeledWindow, NormalizerStats, Recording
from mmtl.errors import DataError
from mmtl.log import get_logger

log = get_logger("data.preprocess")

MEDIAN_WIDTH = 3


def denoise_array(signal: np.ndarray) -> np.ndarray:
    """Median-3 along time, per channel, edges replicated."""
    if signal.ndim != 2:
        raise DataError(f"denoise expects [C, N], got {signal.shape}")
    return median_filter(signal, size=(1, MEDIAN_WIDTH), mode="nearest")


def denoise(recording: Recording) -> Recording:
    return replace(recording, channels=denoise_array(recording.channels))


def fit_normalizer(train_windows: Iterable[LabeledWindow | np.ndarray]) -> NormalizerStats:
    items = list(train_windows)
    if not items:
        raise DataError("fit_normalizer: no training windows")
    arrays = [w.window if isinstance(w, LabeledWindow) else w for w in items]
    channels = {a.shape[0] for a in arrays}
    if len(channels) != 1:
        raise DataError(f"fit_normalizer: mixed channel counts {sorted(channels)}")
    stacked = np.concatenate([a.astype(np.float64) for a in arrays], axis=1)
    mean = stacked.mean(axis=1)
    std = stacked.std(axis=1)
    degenerate = tuple(int(c) for c in np.flatnonzero(std <= 1e-12))
    if degenerate:
        log.warning("zero-variance channels %s: std forced to 1", list(degenerate))
        std = std.copy()
        std[list(degenerate)] = 1.0
    keys = frozenset(w.key for w in items if isinstance(w, LabeledWindow) and w.key)
    return NormalizerStats(mean=mean, std=std, degenerate_channels=degenerate, fit_keys=keys)


def apply_normalizer(window: np.ndarray, stats: NormalizerStats) -> np.ndarray:
    if window.shape[-2] != stats.channels:
        raise DataError(f"window has {window.shape[-2]} channels, normalizer {stats.channels}")
    out = (window - stats.mean[:, None]) / stats.std[:, None]
    return out.astype(window.dtype if np.issubdtype(window.dtype, np.floating) else np.float32)


def invert_normalizer(window: np.ndarray, stats: NormalizerStats) -> np.ndarray:
    out = window * stats.std[:, None] + stats.mean[:, None]
    return out.astype(window.dtype)


def segment_stride(window_len: int, overlap: float) -> int:
    if window_len < 1:
        raise DataError(f"window length must be >= 1, got {window_len}")
    if not 0 <= overlap < 1:
        raise DataError(f"overlap must be in [0, 1), got {overlap}")
    return max(1, int(round(window_len * (1 - overlap))))


def segment_starts(length: int, window_len: int, overlap: float) -> list[int]:
    stride = segment_stride(window_len, overlap)
    if length < window_len:
        return []
    return list(range(0, (length - window_len) // stride * stride + 1, stride))


def segment(recording: Recording | np.ndarray, window_len: int,
            overlap_fraction: float) -> list[np.ndarray]:
    """Fixed-length slices of a recording; each window is [C, window_len]."""
    signal = recording.channels if isinstance(recording, Recording) else recording
    return [signal[:, s:s + window_len].copy()
            for s in segment_starts(signal.shape[1], window_len, overlap_fraction)]
