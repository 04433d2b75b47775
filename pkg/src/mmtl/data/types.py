"""Data containers: recordings, labeled windows and normalizer statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from mmtl.errors import DataError

Partition = Literal["train", "test", "native"]


@dataclass(frozen=True)
class Recording:
    """A contiguous single-activity stretch of one subject's samples."""
    subject_id: int
    activity_id: int            # canonical class id within the dataset's label map
    channels: np.ndarray        # [C, N]
    sample_rate_hz: float
    channel_names: tuple[str, ...] = ()
    source: str = ""
    native_label: str = ""
    timestamps: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.channels.ndim != 2:
            raise DataError(f"recording channels must be [C, N], got {self.channels.shape}")
        if self.sample_rate_hz <= 0:
            raise DataError(f"sample rate must be > 0, got {self.sample_rate_hz}")
        if self.channel_names and len(self.channel_names) != self.channels.shape[0]:
            raise DataError(
                f"{len(self.channel_names)} channel names for {self.channels.shape[0]} channels")

    @property
    def num_samples(self) -> int:
        return int(self.channels.shape[1])


@dataclass(frozen=True)
class LabeledWindow:
    window: np.ndarray          # [C, window_len] float32
    activity: int
    resistance: float
    subject_id: int
    source: str
    key: str = ""               # stable identity used by the leakage check
    partition: Partition = "native"

    def __post_init__(self) -> None:
        if not 0.0 <= self.resistance <= 1.0:
            raise DataError(f"resistance target {self.resistance} outside [0, 1]")
        if self.activity < 0:
            raise DataError(f"negative activity id {self.activity}")


@dataclass(frozen=True)
class NormalizerStats:
    mean: np.ndarray
    std: np.ndarray
    degenerate_channels: tuple[int, ...] = ()
    fit_keys: frozenset[str] = field(default_factory=frozenset, compare=False)

    def __post_init__(self) -> None:
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise DataError(f"normalizer mean {self.mean.shape} vs std {self.std.shape}")
        if np.any(self.std <= 0):
            raise DataError("normalizer std entries must be > 0")

    @property
    def channels(self) -> int:
        return int(self.mean.shape[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "degenerate_channels": list(self.degenerate_channels),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> NormalizerStats:
        try:
            return cls(
                mean=np.asarray(data["mean"], dtype=np.float64),
                std=np.asarray(data["std"], dtype=np.float64),
                degenerate_channels=tuple(int(c) for c in data.get("degenerate_channels", ())),
            )
        except KeyError as e:
            raise DataError(f"normalizer stats missing field {e}") from e


@dataclass(frozen=True)
class ParseSummary:
    """Row accounting for the row-oriented parsers."""
    dataset: str
    raw_rows: int
    accepted_rows: int
    skipped_rows: int
    recordings: int
    claimed_rows: int | None = None
    claim_tolerance: float = 0.05
    # Which count the claim refers to: "accepted" (WISDM) or "raw" (MHEALTH).
    claim_basis: str = "accepted"

    @property
    def claim_within_tolerance(self) -> bool | None:
        if not self.claimed_rows:
            return None
        observed = self.raw_rows if self.claim_basis == "raw" else self.accepted_rows
        return abs(observed - self.claimed_rows) <= self.claim_tolerance * self.claimed_rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "raw_rows": self.raw_rows,
            "accepted_rows": self.accepted_rows,
            "skipped_rows": self.skipped_rows,
            "recordings": self.recordings,
            "claimed_rows": self.claimed_rows,
            "claim_within_tolerance": self.claim_within_tolerance,
        }
