"""TrainJournal: one JSON line per epoch, plus run start/stop markers."""
from __future__ import annotations

import json
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from mmtl.log import get_logger
from mmtl.training.history import EpochRecord

log = get_logger("journal")


class TrainJournal:
    """Records structured entries for a single training run.

    Entries are kept in memory and, when a path is given, appended to a
    JSON-lines file as they happen so a crashed run still leaves its log.
    """

    def __init__(self, path: str | Path | None, run_id: str = "", meta: dict | None = None) -> None:
        self._path = Path(path) if path else None
        self._run_id = run_id
        self._seq = 0
        self._started = time.monotonic()
        self._start_time = datetime.now(timezone.utc)
        self._entries: list[dict[str, Any]] = []
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
        self.log("start", {"started": self._start_time.isoformat(), **(meta or {})})

    @property
    def run_id(self) -> str:
        return self._run_id

    @property
    def path(self) -> Path | None:
        return self._path

    def log(self, phase: str, detail: dict[str, Any] | None = None) -> None:
        self._seq += 1
        entry = {
            "seq": self._seq,
            "run_id": self._run_id,
            "phase": phase,
            "elapsed_s": round(time.monotonic() - self._started, 2),
            **(detail or {}),
        }
        self._entries.append(entry)
        if self._path:
            try:
                with self._path.open("a") as f:
                    f.write(json.dumps(entry, default=str) + "\n")
            except OSError as e:
                log.warning("journal write failed: %s", e)
        log.debug("journal [%s] %s", phase, detail or "")

    def epoch(self, record: EpochRecord) -> None:
        self.log("epoch", record.to_dict())

    def close(self, reason: str = "done") -> None:
        self.log("stop", {"reason": reason, "duration_s": self.duration_s})

    @property
    def entries(self) -> list[dict[str, Any]]:
        return list(self._entries)

    @property
    def duration_s(self) -> float:
        return round(time.monotonic() - self._started, 1)
