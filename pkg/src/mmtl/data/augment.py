"""Window augmentation and class rebalancing."""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from mmtl.data.types import LabeledWindow
from mmtl.errors import ConfigError, DataError

AUGMENT_OPS = ("crop", "rotate", "flip")
CROP_FRACTION = 0.9
MAX_ROTATION_DEG = 20.0

RebalanceStrategy = Literal["oversample", "undersample", "none"]


def _check_ops(ops: Iterable[str]) -> list[str]:
    requested = set(ops)
    unknown = requested - set(AUGMENT_OPS)
    if unknown:
        raise ConfigError(f"unknown augmentation op(s): {', '.join(sorted(unknown))}")
    return [op for op in AUGMENT_OPS if op in requested]


def default_triples(channels: int) -> tuple[tuple[int, int, int], ...]:
    if channels % 3:
        raise DataError(f"{channels} channels cannot be grouped into x/y/z triples")
    return tuple((i, i + 1, i + 2) for i in range(0, channels, 3))


def random_crop(window: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random 90% sub-window stretched back to full length by linear interpolation."""
    length = window.shape[1]
    sub = max(2, int(round(CROP_FRACTION * length)))
    if sub >= length:
        return window.copy()
    start = int(rng.integers(0, length - sub + 1))
    piece = window[:, start:start + sub].astype(np.float64)
    src = np.arange(sub)
    dst = np.linspace(0, sub - 1, length)
    out = np.stack([np.interp(dst, src, ch) for ch in piece])
    return out.astype(window.dtype)


def random_rotation(window: np.ndarray, rng: np.random.Generator,
                    triples: Sequence[tuple[int, int, int]] | None = None) -> np.ndarray:
    """One random rotation (uniform axis, angle within +/-20 degrees) applied to every triple."""
    triples = default_triples(window.shape[0]) if triples is None else triples
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = np.deg2rad(rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG))
    matrix = Rotation.from_rotvec(axis * angle).as_matrix()
    out = window.astype(np.float64, copy=True)
    for triple in triples:
        idx = list(triple)
        out[idx] = matrix @ out[idx]
    return out.astype(window.dtype)


def time_flip(window: np.ndarray) -> np.ndarray:
    return window[:, ::-1].copy()


def augment(window: np.ndarray, rng: np.random.Generator, ops: Iterable[str] = ("crop", "rotate"),
            triples: Sequence[tuple[int, int, int]] | None = None) -> np.ndarray:
    """Apply the requested ops in a fixed order: crop, rotate, flip."""
    out = window
    for op in _check_ops(ops):
        if op == "crop":
            out = random_crop(out, rng)
        elif op == "rotate":
            out = random_rotation(out, rng, triples)
        else:
            out = time_flip(out)
    return out if out is not window else window.copy()


def rebalance(windows: Sequence[LabeledWindow], strategy: RebalanceStrategy,
              rng: np.random.Generator) -> list[LabeledWindow]:
    if strategy not in ("oversample", "undersample", "none"):
        raise ConfigError(f"rebalance strategy must be oversample|undersample|none, got {strategy!r}")
    if not windows:
        raise DataError("rebalance: no windows")
    if strategy == "none":
        return list(windows)
    by_class: dict[int, list[int]] = defaultdict(list)
    for i, w in enumerate(windows):
        by_class[w.activity].append(i)
    counts = {c: len(idx) for c, idx in by_class.items()}
    if strategy == "oversample":
        target = max(counts.values())
        out = list(windows)
        for c in sorted(by_class):
            need = target - counts[c]
            if need:
                extra = rng.choice(by_class[c], size=need, replace=True)
                out.extend(windows[int(i)] for i in extra)
        return out
    target = min(counts.values())
    keep: list[int] = []
    for c in sorted(by_class):
        keep.extend(int(i) for i in rng.choice(by_class[c], size=target, replace=False))
    return [windows[i] for i in sorted(keep)]
