"""Readers for the published on-disk formats of UCI HAR, WISDM v1.1 and MHEALTH."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from mmtl.data.datasets import MHEALTH, UCI_HAR, WISDM
from mmtl.data.preprocess import denoise_array
from mmtl.data.resistance import synthesize_resistance
from mmtl.data.types import LabeledWindow, ParseSummary, Recording
from mmtl.errors import DataError
from mmtl.log import get_logger

log = get_logger("data.parsers")

UCI_SPLITS = ("train", "test")
UCI_TOTAL_WINDOWS = 10_299
UCI_SIGNAL_FILES = (
    "body_acc_x", "body_acc_y", "body_acc_z",
    "body_gyro_x", "body_gyro_y", "body_gyro_z",
    "total_acc_x", "total_acc_y", "total_acc_z",
)

WISDM_FILE = "WISDM_ar_v1.1_raw.txt"
WISDM_CLAIMED_ROWS = 1_098_207
WISDM_CLAIM_TOLERANCE = 0.005
WISDM_MAX_MALFORMED = 0.05
WISDM_LABELS = {
    "Walking": "walking",
    "Jogging": "jogging",
    "Upstairs": "ascending_stairs",
    "Downstairs": "descending_stairs",
    "Sitting": "sitting",
    "Standing": "standing",
}

MHEALTH_SUBJECTS = tuple(range(1, 11))
MHEALTH_COLUMNS = 24
# chest acc (0-2), left-ankle acc (5-7), left-ankle gyro (8-10); ECG (3-4) is parsed but unused
MHEALTH_CHANNEL_COLUMNS = (0, 1, 2, 5, 6, 7, 8, 9, 10)
MHEALTH_CLAIMED_ROWS = 1_144_000


def _read_table(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    try:
        return pd.read_csv(path, sep=r"\s+", header=None, dtype=np.float64).to_numpy()
    except (ValueError, pd.errors.ParserError) as e:
        raise DataError(f"cannot parse {path}: {e}") from e


def _uci_dir(root: Path) -> Path:
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    nested = root / "UCI HAR Dataset"
    return nested if nested.is_dir() and not (root / "train").is_dir() else root


def parse_uci_har(root_dir: str | Path) -> list[LabeledWindow]:
    """Pre-windowed raw inertial signals, 9 x 128 per window, train then test."""
    root = _uci_dir(Path(root_dir))
    class_of = {i + 1: i for i in range(UCI_HAR.num_classes)}
    windows: list[LabeledWindow] = []
    for split in UCI_SPLITS:
        split_dir = root / split
        labels = _read_table(split_dir / f"y_{split}.txt").astype(int).ravel()
        subjects = _read_table(split_dir / f"subject_{split}.txt").astype(int).ravel()
        if len(subjects) != len(labels):
            raise DataError(f"{split}: {len(subjects)} subject rows vs {len(labels)} labels")
        signals = []
        for name in UCI_SIGNAL_FILES:
            table = _read_table(split_dir / "Inertial Signals" / f"{name}_{split}.txt")
            if table.shape[0] != len(labels):
                raise DataError(f"{name}_{split}.txt has {table.shape[0]} rows, "
                                f"y_{split}.txt has {len(labels)}")
            signals.append(table)
        lengths = {s.shape[1] for s in signals}
        if lengths != {UCI_HAR.window}:
            raise DataError(f"{split}: expected {UCI_HAR.window} samples per row, got {sorted(lengths)}")
        data = np.stack(signals, axis=1).astype(np.float32)
        for i, (label, subject) in enumerate(zip(labels, subjects)):
            if label not in class_of:
                raise DataError(f"{split}: label {label} on row {i + 1} not in 1..{UCI_HAR.num_classes}")
            activity = class_of[label]
            r = synthesize_resistance(denoise_array(data[i]), activity, UCI_HAR)
            windows.append(LabeledWindow(
                window=data[i], activity=activity, resistance=r, subject_id=int(subject),
                source=UCI_HAR.name, key=f"uci-har:{split}:{i}", partition=split,
            ))
        log.info("uci-har %s: %d windows", split, len(labels))
    if len(windows) != UCI_TOTAL_WINDOWS:
        log.warning("uci-har: %d windows, full dataset has %d", len(windows), UCI_TOTAL_WINDOWS)
    return windows


@dataclass(frozen=True)
class FeatureTable:
    """The 561-feature engineered vectors shipped with UCI HAR (inspection only)."""
    feature_names: tuple[str, ...]
    train: np.ndarray
    test: np.ndarray
    train_labels: np.ndarray
    test_labels: np.ndarray


def parse_uci_features(root_dir: str | Path) -> FeatureTable:
    root = _uci_dir(Path(root_dir))
    names_path = root / "features.txt"
    if not names_path.is_file():
        raise DataError(f"missing file: {names_path}")
    names = tuple(line.split(maxsplit=1)[1].strip()
                  for line in names_path.read_text().splitlines() if line.strip())
    parts = {}
    for split in UCI_SPLITS:
        x = _read_table(root / split / f"X_{split}.txt")
        y = _read_table(root / split / f"y_{split}.txt").astype(int).ravel() - 1
        if x.shape[1] != len(names) or x.shape[0] != len(y):
            raise DataError(f"X_{split}.txt is {x.shape}, expected [{len(y)}, {len(names)}]")
        parts[split] = (x, y)
    return FeatureTable(names, parts["train"][0], parts["test"][0], parts["train"][1], parts["test"][1])


def _wisdm_path(raw_file: str | Path) -> Path:
    path = Path(raw_file)
    if path.is_dir():
        path = path / WISDM_FILE
    if not path.is_file():
        raise DataError(f"WISDM raw file not found: {path}")
    return path


def _parse_wisdm_row(row: str) -> tuple[int, str, int, float, float, float] | None:
    fields = row.rstrip(",").split(",")
    if len(fields) != 6 or any(not f.strip() for f in fields):
        return None
    try:
        user = int(fields[0])
        label = WISDM_LABELS[fields[1].strip()]
        ts = int(fields[2])
        x, y, z = (float(v) for v in fields[3:])
    except (KeyError, ValueError):
        return None
    if not all(np.isfinite((x, y, z))):
        return None
    return user, label, ts, x, y, z


def parse_wisdm(raw_file: str | Path) -> tuple[list[Recording], ParseSummary]:
    """Contiguous (user, activity) runs of the raw accelerometer stream."""
    path = _wisdm_path(raw_file)
    try:
        text = path.read_text(errors="replace")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    rows = [r.strip() for chunk in text.split(";") for r in chunk.splitlines()]
    rows = [r for r in rows if r]
    class_id = {name: i for i, name in enumerate(WISDM.class_names)}

    recordings: list[Recording] = []
    skipped = 0
    run_key: tuple[int, str] | None = None
    run_samples: list[tuple[float, float, float]] = []
    run_ts: list[int] = []
    backwards = 0

    def flush() -> None:
        if run_key is None or not run_samples:
            return
        user, label = run_key
        recordings.append(Recording(
            subject_id=user, activity_id=class_id[label],
            channels=np.asarray(run_samples, dtype=np.float32).T,
            sample_rate_hz=WISDM.sample_rate_hz, channel_names=WISDM.channel_names,
            source=WISDM.name, native_label=label, timestamps=np.asarray(run_ts, dtype=np.int64),
        ))

    for row in rows:
        parsed = _parse_wisdm_row(row)
        if parsed is None:
            skipped += 1
            continue
        user, label, ts, x, y, z = parsed
        if (user, label) != run_key:
            flush()
            run_key, run_samples, run_ts = (user, label), [], []
        elif ts < run_ts[-1]:
            backwards += 1
        run_samples.append((x, y, z))
        run_ts.append(ts)
    flush()

    raw = len(rows)
    if raw == 0:
        raise DataError(f"{path}: no rows")
    if skipped / raw > WISDM_MAX_MALFORMED:
        raise DataError(f"{path}: {skipped}/{raw} malformed rows exceeds "
                        f"{WISDM_MAX_MALFORMED:.0%}; is this the v1.1 raw file?")
    if backwards:
        log.warning("wisdm: %d non-monotonic timestamps within recordings", backwards)
    summary = ParseSummary(WISDM.name, raw, raw - skipped, skipped, len(recordings),
                           claimed_rows=WISDM_CLAIMED_ROWS,
                           claim_tolerance=WISDM_CLAIM_TOLERANCE)
    log.info("wisdm: %d rows accepted, %d skipped, %d recordings",
             summary.accepted_rows, skipped, len(recordings))
    return recordings, summary


def _runs(labels: np.ndarray) -> list[tuple[int, int]]:
    """[start, end) bounds of constant-value runs."""
    if len(labels) == 0:
        return []
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [len(labels)]))
    return list(zip(starts.tolist(), ends.tolist()))


def parse_mhealth(root_dir: str | Path) -> tuple[list[Recording], ParseSummary]:
    root = Path(root_dir)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    recordings: list[Recording] = []
    raw_rows = accepted = 0
    for subject in MHEALTH_SUBJECTS:
        path = root / f"mHealth_subject{subject}.log"
        table = _read_table(path)
        if table.shape[1] != MHEALTH_COLUMNS or np.isnan(table).any():
            raise DataError(f"{path.name}: inconsistent column count "
                            f"(expected {MHEALTH_COLUMNS} per row)")
        raw_rows += table.shape[0]
        labels = table[:, -1].astype(int)
        for start, end in _runs(labels):
            label = int(labels[start])
            if label == 0:
                continue
            if not 1 <= label <= MHEALTH.num_classes:
                raise DataError(f"{path.name}: unknown activity label {label} at row {start + 1}")
            accepted += end - start
            recordings.append(Recording(
                subject_id=subject, activity_id=label - 1,
                channels=table[start:end, list(MHEALTH_CHANNEL_COLUMNS)].T.astype(np.float32),
                sample_rate_hz=MHEALTH.sample_rate_hz, channel_names=MHEALTH.channel_names,
                source=MHEALTH.name, native_label=MHEALTH.class_names[label - 1],
            ))
    summary = ParseSummary(MHEALTH.name, raw_rows, accepted, raw_rows - accepted, len(recordings),
                           claimed_rows=MHEALTH_CLAIMED_ROWS, claim_basis="raw")
    if summary.claim_within_tolerance is False:
        log.warning("mhealth: %d rows parsed vs %d described for the dataset",
                    raw_rows, MHEALTH_CLAIMED_ROWS)
    log.info("mhealth: %d subjects, %d labeled rows, %d recordings",
             len(MHEALTH_SUBJECTS), accepted, len(recordings))
    return recordings, summary
