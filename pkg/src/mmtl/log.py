"""Logging: rich diagnostics on stderr, optional JSON-lines file, run-id stamping."""
from __future__ import annotations

import json
import logging
from contextvars import ContextVar
from datetime import datetime, timezone
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler
from rich.theme import Theme

LOGGER = "mmtl"
LOG_FILE = "mmtl.jsonl"

_theme = Theme({
    "info": "cyan",
    "warn": "yellow bold",
    "error": "red bold",
    "success": "green bold",
    "dim": "dim",
})
# Machine output (JSON) goes to stdout; everything human goes here.
console = Console(theme=_theme, stderr=True)

_run_id: ContextVar[str | None] = ContextVar("mmtl_run_id", default=None)


def set_run_id(run_id: str | None) -> None:
    """Stamp subsequent JSON log entries with a run id (matches the training journal)."""
    _run_id.set(run_id)


class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "ts": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname,
            "module": record.name,
            "msg": record.getMessage(),
        }
        run_id = _run_id.get()
        if run_id:
            entry["run_id"] = run_id
        if record.exc_info and record.exc_info[1]:
            entry["error"] = str(record.exc_info[1])
        data = getattr(record, "data", None)
        if data is not None:
            entry["data"] = data
        return json.dumps(entry, default=str)


def setup_logging(log_dir: str | Path | None = None, verbose: bool = False,
                  quiet: bool = False) -> None:
    """(Re)configure the mmtl logger. Safe to call once per command."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logger = logging.getLogger(LOGGER)
    logger.setLevel(level)
    for h in list(logger.handlers):
        logger.removeHandler(h)
        h.close()

    human = RichHandler(console=console, level=level, show_time=False, show_path=verbose,
                        markup=False, rich_tracebacks=verbose)
    human.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    logger.addHandler(human)

    if log_dir:
        path = Path(log_dir)
        path.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(path / LOG_FILE)
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(_JsonFormatter())
        logger.addHandler(fh)
        # the file gets everything; the console handler keeps its own level
        logger.setLevel(logging.DEBUG)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(f"{LOGGER}.{name}")
