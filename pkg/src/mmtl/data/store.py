"""Binary window store (MMWD): one little-endian file per prepared split.

Layout: b"MMWD", u32 version, u64 count, then per window
u16 channels, u16 length, u8 activity, f32 resistance, u16 subject,
f32 samples row-major.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from mmtl.data.types import LabeledWindow
from mmtl.errors import DataError

MAGIC = b"MMWD"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_RECORD = struct.Struct("<HHBfH")


def write_windows(path: str | Path, windows: Sequence[LabeledWindow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, len(windows)))
        for w in windows:
            c, t = w.window.shape
            if c > 0xFFFF or t > 0xFFFF or not 0 <= w.activity <= 0xFF or not 0 <= w.subject_id <= 0xFFFF:
                raise DataError(f"window {w.key or '?'} does not fit the MMWD field widths")
            f.write(_RECORD.pack(c, t, w.activity, w.resistance, w.subject_id))
            f.write(np.ascontiguousarray(w.window, dtype="<f4").tobytes())
    tmp.replace(path)
    return path


def read_windows(path: str | Path, source: str = "", split: str = "") -> list[LabeledWindow]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read window store {path}: {e}") from e
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: not a window store (magic {magic!r})")
    if version != VERSION:
        raise DataError(f"{path}: unsupported window store version {version}")
    offset = _HEADER.size
    windows = []
    prefix = f"{source}:{split}" if split else source
    for i in range(count):
        if offset + _RECORD.size > len(data):
            raise DataError(f"{path}: truncated at window {i}")
        c, t, activity, resistance, subject = _RECORD.unpack_from(data, offset)
        offset += _RECORD.size
        nbytes = 4 * c * t
        if offset + nbytes > len(data):
            raise DataError(f"{path}: truncated samples at window {i}")
        samples = np.frombuffer(data, dtype="<f4", count=c * t, offset=offset).reshape(c, t)
        offset += nbytes
        windows.append(LabeledWindow(
            window=samples.astype(np.float32), activity=activity,
            resistance=float(min(max(resistance, 0.0), 1.0)), subject_id=subject,
            source=source, key=f"{prefix}:{i}",
            partition="test" if split == "test" else "train" if split else "native",
        ))
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing bytes")
    return windows
