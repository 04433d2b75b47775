"""Checkpoint files: params, optimizer moments, configs and history.

Layout: b"MMTL", u32 LE version, u64 LE manifest length, UTF-8 JSON manifest,
then the tensors as little-endian float32 in manifest order. Tensor offsets
in the manifest are relative to the end of the manifest.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from mmtl.errors import (
    BadMagicError,
    CheckpointBoundsError,
    CheckpointError,
    ConfigError,
    UnsupportedVersionError,
)
from mmtl.log import get_logger
from mmtl.model.config import ModelConfig
from mmtl.model.network import ModelParams, param_shapes
from mmtl.training.config import TrainConfig
from mmtl.training.history import TrainHistory
from mmtl.training.optim import OptimizerState

log = get_logger("checkpoint")

MAGIC = b"MMTL"
VERSION = 1
_PREAMBLE = struct.Struct("<4sIQ")
_M_PREFIX = "optimizer.m/"
_V_PREFIX = "optimizer.v/"


@dataclass
class Checkpoint:
    params: ModelParams
    model_config: ModelConfig
    train_config: TrainConfig | None = None
    optimizer: OptimizerState | None = None
    history: TrainHistory = field(default_factory=TrainHistory)
    epoch: int = 0
    extras: dict[str, Any] = field(default_factory=dict)

    def save(self, path: str | Path) -> Path:
        return save_checkpoint(path, self.params, self.model_config, self.optimizer, self.history,
                               train_config=self.train_config, epoch=self.epoch, extras=self.extras)


def save_checkpoint(path: str | Path, params: ModelParams, config: ModelConfig,
                    optimizer_state: OptimizerState | None = None,
                    history: TrainHistory | None = None, *,
                    train_config: TrainConfig | None = None, epoch: int | None = None,
                    extras: dict[str, Any] | None = None) -> Path:
    history = history or TrainHistory()
    tensors: list[tuple[str, np.ndarray]] = list(params.items())
    if optimizer_state is not None:
        tensors += [(_M_PREFIX + n, a) for n, a in optimizer_state.m.items()]
        tensors += [(_V_PREFIX + n, a) for n, a in optimizer_state.v.items()]

    table, blobs, offset = [], [], 0
    for name, arr in tensors:
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        table.append({"name": name, "shape": list(arr.shape), "dtype": "f32",
                      "offset": offset, "length": len(blob)})
        blobs.append(blob)
        offset += len(blob)

    manifest = {
        "tensors": table,
        "model_config": config.to_dict(),
        "train_config": train_config.to_dict() if train_config else None,
        "optimizer": {"t": optimizer_state.t} if optimizer_state is not None else None,
        "epoch": history.last_epoch if epoch is None else epoch,
        "history": history.to_list(),
        "extras": extras or {},
    }
    body = json.dumps(manifest, sort_keys=True).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, VERSION, len(body)))
        f.write(body)
        for blob in blobs:
            f.write(blob)
    tmp.replace(path)
    log.info("checkpoint written: %s (%d tensors, epoch %d)", path, len(table), manifest["epoch"])
    return path


def _check_tensors(path: Path, found: dict[str, np.ndarray],
                   expected: dict[str, tuple[int, ...]], kind: str) -> None:
    missing = sorted(set(expected) - set(found))
    extra = sorted(set(found) - set(expected))
    wrong = sorted(f"{n} {found[n].shape} != {tuple(s)}" for n, s in expected.items()
                   if n in found and found[n].shape != tuple(s))
    problems = []
    if missing:
        problems.append(f"missing {', '.join(missing)}")
    if extra:
        problems.append(f"unexpected {', '.join(extra)}")
    if wrong:
        problems.append(f"shape mismatch {', '.join(wrong)}")
    if problems:
        raise CheckpointError(f"{path}: {kind} do not match the model config: {'; '.join(problems)}")


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if len(data) < _PREAMBLE.size:
        raise CheckpointBoundsError(f"{path}: file shorter than the header")
    magic, version, manifest_len = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: checkpoint version {version}, supported {VERSION}")
    start = _PREAMBLE.size
    if start + manifest_len > len(data):
        raise CheckpointBoundsError(f"{path}: manifest length {manifest_len} runs past end of file")
    try:
        manifest = json.loads(data[start:start + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable manifest: {e}") from e

    base = start + manifest_len
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest.get("tensors", []):
        name, shape = entry["name"], tuple(entry["shape"])
        off, length = int(entry["offset"]), int(entry["length"])
        if entry.get("dtype") != "f32":
            raise CheckpointError(f"{path}: tensor {name} has unsupported dtype {entry.get('dtype')}")
        if int(np.prod(shape, dtype=np.int64)) * 4 != length:
            raise CheckpointBoundsError(f"{path}: tensor {name} shape {shape} does not match {length} bytes")
        if off < 0 or base + off + length > len(data):
            raise CheckpointBoundsError(f"{path}: tensor {name} at [{off}, {off + length}) outside file")
        arrays[name] = np.frombuffer(data, dtype="<f4", count=length // 4,
                                     offset=base + off).reshape(shape).astype(np.float32)

    try:
        model_config = ModelConfig.from_dict(manifest["model_config"])
        train_cfg = manifest.get("train_config")
        train_config = TrainConfig.from_dict(train_cfg) if train_cfg else None
    except (KeyError, ConfigError) as e:
        raise CheckpointError(f"{path}: invalid config in manifest: {e}") from e

    params = {n: a for n, a in arrays.items() if not n.startswith((_M_PREFIX, _V_PREFIX))}
    _check_tensors(path, params, param_shapes(model_config), "params")
    optimizer = None
    if manifest.get("optimizer") is not None:
        optimizer = OptimizerState(
            m={n[len(_M_PREFIX):]: a for n, a in arrays.items() if n.startswith(_M_PREFIX)},
            v={n[len(_V_PREFIX):]: a for n, a in arrays.items() if n.startswith(_V_PREFIX)},
            t=int(manifest["optimizer"]["t"]),
        )
        for kind, moments in (("optimizer.m", optimizer.m), ("optimizer.v", optimizer.v)):
            # moments may cover a subset (frozen backbone) but nothing foreign
            expected = {n: a.shape for n, a in params.items() if n in moments}
            _check_tensors(path, moments, expected, kind)
    return Checkpoint(
        params=params,
        model_config=model_config,
        train_config=train_config,
        optimizer=optimizer,
        history=TrainHistory.from_list(manifest.get("history", [])),
        epoch=int(manifest.get("epoch", 0)),
        extras=manifest.get("extras", {}),
    )
