"""Deterministic resistance targets derived from activity and motion intensity.

None of the supported datasets measures resistance. Targets are synthesized as

    r = clamp(base(activity) + KAPPA * (min(SMA / SMA_REF, 1) - 0.5), 0, 1)

where SMA is the mean over time of the summed absolute acceleration (m/s^2)
of the dataset's SMA channels, taken from the denoised, un-normalized window.
Every report carries SCHEME_ID so numbers are never mistaken for measurements.
"""
from __future__ import annotations

import numpy as np

from mmtl.data.datasets import DatasetInfo, get_dataset
from mmtl.errors import DataError

SCHEME_ID = "sma-base-v1"
SMA_REF = 30.0
KAPPA = 0.15

BASE_RESISTANCE: dict[str, float] = {
    "lying": 0.05,
    "sitting": 0.10,
    "standing": 0.15,
    "arm_elevation": 0.20,
    "waist_bends": 0.35,
    "walking": 0.45,
    "descending_stairs": 0.55,
    "cycling": 0.60,
    "knees_bending": 0.65,
    "ascending_stairs": 0.70,
    "jogging": 0.85,
    "running": 0.85,
    "jumping": 0.90,
    # synthetic smoke dataset
    "slow": 0.25,
    "medium": 0.50,
    "fast": 0.75,
}


def signal_magnitude_area(window: np.ndarray, dataset: DatasetInfo) -> float:
    if window.ndim != 2 or window.shape[0] != dataset.num_channels:
        raise DataError(f"{dataset.name} window must be [{dataset.num_channels}, T], got {window.shape}")
    acc = np.abs(window[list(dataset.sma_channels)].astype(np.float64)) * dataset.sma_scale
    return float(acc.sum(axis=0).mean())


def activity_name(activity: int | str, dataset: DatasetInfo) -> str:
    if isinstance(activity, str):
        return activity
    if not 0 <= activity < dataset.num_classes:
        raise DataError(f"activity id {activity} not in the {dataset.name} label map")
    return dataset.class_names[activity]


def synthesize_resistance(window: np.ndarray, activity: int | str,
                          dataset: DatasetInfo | str = "uci-har") -> float:
    info = get_dataset(dataset) if isinstance(dataset, str) else dataset
    name = activity_name(activity, info)
    try:
        base = BASE_RESISTANCE[name]
    except KeyError:
        raise DataError(f"no base resistance for activity {name!r}") from None
    sma_norm = min(signal_magnitude_area(window, info) / SMA_REF, 1.0)
    return float(np.clip(base + KAPPA * (sma_norm - 0.5), 0.0, 1.0))
