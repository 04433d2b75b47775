"""Host telemetry stamped into benchmark reports: CPU, memory, numeric runtime."""
from __future__ import annotations

import os
import platform
from pathlib import Path
from typing import Any

import numpy as np
import psutil

from mmtl.log import get_logger

log = get_logger("telemetry")

_GB = 1024 ** 3
# Thread-count knobs read by the BLAS backends numpy may be linked against.
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _cpu_model() -> str:
    cpuinfo = Path("/proc/cpuinfo")
    try:
        for line in cpuinfo.read_text().splitlines():
            if line.startswith("model name"):
                return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or "unknown"


def _load_percent() -> float:
    """1-minute load as a percentage of logical cores; a busy host skews latency."""
    try:
        load_1, _, _ = psutil.getloadavg()
    except (AttributeError, OSError):
        return float(psutil.cpu_percent(interval=0.1))
    return 100.0 * load_1 / (psutil.cpu_count(logical=True) or 1)


def _cpu_info() -> dict[str, Any]:
    try:
        freq = psutil.cpu_freq()
    except (OSError, NotImplementedError) as e:
        log.debug("cpu_freq unavailable: %s", e)
        freq = None
    try:
        usable = len(psutil.Process().cpu_affinity())
    except (AttributeError, psutil.Error):
        usable = psutil.cpu_count(logical=True) or 0
    return {
        "name": _cpu_model(),
        "cores_physical": psutil.cpu_count(logical=False) or 0,
        "cores_logical": psutil.cpu_count(logical=True) or 0,
        "cores_usable": usable,
        "freq_mhz": round(freq.current) if freq else 0,
        "load_1m": round(_load_percent(), 1),
    }


def _ram_info() -> dict[str, Any]:
    mem = psutil.virtual_memory()
    rss = psutil.Process().memory_info().rss
    return {
        "total_gb": round(mem.total / _GB, 1),
        "available_gb": round(mem.available / _GB, 1),
        "percent": round(mem.percent, 1),
        "process_rss_mb": round(rss / 1024 ** 2, 1),
    }


def _runtime_info() -> dict[str, Any]:
    return {
        "system": platform.system(),
        "release": platform.release(),
        "machine": platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": {k: os.environ[k] for k in _THREAD_VARS if k in os.environ},
    }


def host_info() -> dict[str, Any]:
    """Machine description for interpreting latency numbers."""
    return {"cpu": _cpu_info(), "ram": _ram_info(), "platform": _runtime_info()}
