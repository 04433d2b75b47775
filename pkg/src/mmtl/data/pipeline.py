"""From dataset files to normalized train/val/test splits.

parse -> denoise -> segment -> synthesize resistance -> split -> rebalance
-> augment -> fit normalizer on train -> normalize every split.
"""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np

from mmtl.data.augment import augment, rebalance
from mmtl.data.datasets import DatasetInfo, get_dataset
from mmtl.data.parsers import parse_mhealth, parse_uci_har, parse_wisdm
from mmtl.data.preprocess import apply_normalizer, denoise, denoise_array, fit_normalizer, segment_starts
from mmtl.data.resistance import synthesize_resistance
from mmtl.data.store import read_windows, write_windows
from mmtl.data.synthetic import generate_synthetic
from mmtl.data.types import LabeledWindow, NormalizerStats, ParseSummary, Recording
from mmtl.errors import ConfigError, DataError
from mmtl.log import get_logger

log = get_logger("data.pipeline")

SplitMode = Literal["random", "by_subject"]
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class DatasetConfig:
    name: str = "uci-har"
    root: str = ""
    window: int | None = None
    overlap: float | None = None
    split_mode: SplitMode = "random"
    train_fraction: float = 0.8
    test_fraction: float = 0.2
    rebalance: str = "oversample"
    augment_ops: tuple[str, ...] = ("crop", "rotate")
    augment_copies: int = 1
    cache_dir: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "augment_ops", tuple(self.augment_ops))
        info = get_dataset(self.name)
        if self.split_mode not in ("random", "by_subject"):
            raise ConfigError(f"dataset.split_mode must be random|by_subject, got {self.split_mode!r}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"dataset.train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0 <= self.test_fraction < 1:
            raise ConfigError(f"dataset.test_fraction must be in [0, 1), got {self.test_fraction}")
        if self.augment_copies < 0:
            raise ConfigError("dataset.augment_copies must be >= 0")
        if info.prewindowed and self.window not in (None, info.window):
            raise ConfigError(f"{info.name} is pre-windowed at {info.window} samples")
        if self.overlap is not None and not 0 <= self.overlap < 1:
            raise ConfigError(f"dataset.overlap must be in [0, 1), got {self.overlap}")

    @property
    def info(self) -> DatasetInfo:
        return get_dataset(self.name)

    @property
    def window_len(self) -> int:
        return self.window or self.info.window

    @property
    def overlap_fraction(self) -> float:
        return self.info.overlap if self.overlap is None else self.overlap

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DatasetConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown dataset config key: dataset.{unknown[0]}")
        return cls(**{k: v for k, v in data.items() if v is not None or k == "cache_dir"})

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["augment_ops"] = list(self.augment_ops)
        return d


@dataclass
class PreparedData:
    info: DatasetInfo
    config: DatasetConfig
    train: list[LabeledWindow]
    val: list[LabeledWindow]
    test: list[LabeledWindow]
    normalizer: NormalizerStats
    summary: ParseSummary | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def class_names(self) -> tuple[str, ...]:
        return self.info.class_names

    def split(self, name: str) -> list[LabeledWindow]:
        if name not in SPLIT_NAMES:
            raise ConfigError(f"split must be one of {', '.join(SPLIT_NAMES)}, got {name!r}")
        return getattr(self, name)

    def arrays(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return windows_to_arrays(self.split(name))


def windows_to_arrays(windows: Sequence[LabeledWindow]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not windows:
        raise DataError("empty window set")
    x = np.stack([w.window for w in windows]).astype(np.float32)
    y = np.array([w.activity for w in windows], dtype=np.int64)
    r = np.array([w.resistance for w in windows], dtype=np.float32)
    return x, y, r


# ── loading ─────────────────────────────────────────────────────────────────

def window_recordings(recordings: Sequence[Recording], info: DatasetInfo, window_len: int,
                      overlap: float) -> list[LabeledWindow]:
    """Denoise, segment and label every recording."""
    windows = []
    for idx, rec in enumerate(recordings):
        clean = denoise(rec).channels
        for start in segment_starts(clean.shape[1], window_len, overlap):
            w = clean[:, start:start + window_len].astype(np.float32)
            windows.append(LabeledWindow(
                window=w, activity=rec.activity_id,
                resistance=synthesize_resistance(w, rec.activity_id, info),
                subject_id=rec.subject_id, source=info.name, key=f"{info.name}:{idx}:{start}",
            ))
    return windows


def load_windows(cfg: DatasetConfig) -> tuple[list[LabeledWindow], ParseSummary | None]:
    """Every labeled, denoised (not yet normalized) window of the dataset."""
    info = cfg.info
    summary = None
    if info.name == "uci-har":
        windows = [replace(w, window=denoise_array(w.window)) for w in parse_uci_har(cfg.root)]
        return windows, None
    if info.name == "wisdm":
        recordings, summary = parse_wisdm(cfg.root)
    elif info.name == "mhealth":
        recordings, summary = parse_mhealth(cfg.root)
    else:
        recordings = generate_synthetic(seed=cfg.seed)
    windows = window_recordings(recordings, info, cfg.window_len, cfg.overlap_fraction)
    if not windows:
        raise DataError(f"{info.name}: no recording is at least {cfg.window_len} samples long")
    log.info("%s: %d windows of %d samples from %d recordings",
             info.name, len(windows), cfg.window_len, len(recordings))
    return windows, summary


# ── splitting ───────────────────────────────────────────────────────────────

def _cut(n: int, fraction: float) -> int:
    if n < 2:
        raise DataError(f"cannot split {n} item(s) into two non-empty parts")
    return min(max(int(round(fraction * n)), 1), n - 1)


def split(windows: Sequence[LabeledWindow], train_fraction: float, seed: int,
          mode: SplitMode = "random") -> tuple[list[LabeledWindow], list[LabeledWindow]]:
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    if mode == "random":
        order = rng.permutation(len(windows))
        n_train = _cut(len(windows), train_fraction)
        return [windows[i] for i in order[:n_train]], [windows[i] for i in order[n_train:]]
    if mode != "by_subject":
        raise ConfigError(f"split mode must be random|by_subject, got {mode!r}")
    subjects = sorted({w.subject_id for w in windows})
    order = rng.permutation(len(subjects))
    chosen = {subjects[i] for i in order[:_cut(len(subjects), train_fraction)]}
    train = [w for w in windows if w.subject_id in chosen]
    val = [w for w in windows if w.subject_id not in chosen]
    return train, val


def _augmented(train: Sequence[LabeledWindow], cfg: DatasetConfig,
               rng: np.random.Generator) -> list[LabeledWindow]:
    if not cfg.augment_ops or cfg.augment_copies == 0:
        return []
    extra = []
    for w in train:
        for k in range(cfg.augment_copies):
            extra.append(replace(w, window=augment(w.window, rng, cfg.augment_ops, cfg.info.triples),
                                 key=f"{w.key}#aug{k}"))
    return extra


def make_splits(windows: Sequence[LabeledWindow], cfg: DatasetConfig,
                summary: ParseSummary | None = None) -> PreparedData:
    info = cfg.info
    if info.name == "uci-har":
        pool = [w for w in windows if w.partition == "train"]
        test = [w for w in windows if w.partition == "test"]
    elif cfg.test_fraction > 0:
        pool, test = split(windows, 1 - cfg.test_fraction, cfg.seed, cfg.split_mode)
    else:
        pool, test = list(windows), []
    train, val = split(pool, cfg.train_fraction, cfg.seed + 1, cfg.split_mode)

    rng = np.random.default_rng(cfg.seed)
    train = rebalance(train, cfg.rebalance, rng)
    train = train + _augmented(train, cfg, rng)
    stats = fit_normalizer(train)

    held_out = {w.key for w in val} | {w.key for w in test}
    leaked = held_out & stats.fit_keys
    if leaked:
        raise DataError(f"{len(leaked)} val/test windows were used to fit the normalizer")

    def norm(ws: Sequence[LabeledWindow]) -> list[LabeledWindow]:
        return [replace(w, window=apply_normalizer(w.window, stats)) for w in ws]

    log.info("%s splits: train %d, val %d, test %d", info.name, len(train), len(val), len(test))
    return PreparedData(info, cfg, norm(train), norm(val), norm(test), stats, summary)


# ── cache ───────────────────────────────────────────────────────────────────

def _cache_dir(cfg: DatasetConfig) -> Path:
    payload = cfg.to_dict()
    payload.pop("cache_dir")
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]
    return Path(cfg.cache_dir) / f"{cfg.name}-{digest}"


def _load_cached(path: Path, cfg: DatasetConfig) -> PreparedData | None:
    files = [path / f"{s}.mmwd" for s in SPLIT_NAMES] + [path / "normalizer.json"]
    if not all(f.is_file() for f in files):
        return None
    splits = {s: read_windows(path / f"{s}.mmwd", cfg.name, s) for s in SPLIT_NAMES}
    stats = NormalizerStats.from_dict(json.loads((path / "normalizer.json").read_text()))
    log.info("loaded cached splits from %s", path)
    return PreparedData(cfg.info, cfg, splits["train"], splits["val"], splits["test"], stats)


def _write_cache(path: Path, data: PreparedData) -> None:
    for s in SPLIT_NAMES:
        write_windows(path / f"{s}.mmwd", data.split(s))
    (path / "normalizer.json").write_text(json.dumps(data.normalizer.to_dict(), indent=2))
    log.info("cached splits to %s", path)


def prepare_dataset(cfg: DatasetConfig) -> PreparedData:
    if cfg.cache_dir:
        cached = _load_cached(_cache_dir(cfg), cfg)
        if cached is not None:
            return cached
    windows, summary = load_windows(cfg)
    data = make_splits(windows, cfg, summary)
    if cfg.cache_dir:
        _write_cache(_cache_dir(cfg), data)
    return data


def dataset_summary(cfg: DatasetConfig) -> dict[str, Any]:
    """Counts for inspection: windows, class histogram, subjects, sample rate."""
    info = cfg.info
    windows, summary = load_windows(cfg)
    counts = Counter(w.activity for w in windows)
    out: dict[str, Any] = {
        "dataset": info.name,
        "sample_rate_hz": info.sample_rate_hz,
        "channels": list(info.channel_names),
        "window": cfg.window_len,
        "overlap": cfg.overlap_fraction,
        "windows": len(windows),
        "class_histogram": {info.class_names[c]: counts.get(c, 0) for c in range(info.num_classes)},
        "subjects": sorted({w.subject_id for w in windows}),
    }
    if info.name == "uci-har":
        out["partitions"] = dict(Counter(w.partition for w in windows))
    if summary is not None:
        out["rows"] = summary.to_dict()
    return out
