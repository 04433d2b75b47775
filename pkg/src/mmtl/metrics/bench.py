"""Batch-1 latency and throughput benchmark.

Each timed iteration runs denoise, normalize and a single-window forward on
one raw window. RTR is the forward alone, LT the whole path. Throughput comes
from a separate uninterrupted streaming pass.
"""
from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from mmtl.data.preprocess import apply_normalizer, denoise_array, invert_normalizer
from mmtl.data.types import LabeledWindow, NormalizerStats
from mmtl.errors import ConfigError, DataError
from mmtl.log import get_logger
from mmtl.metrics.report import BenchReport
from mmtl.model.config import ModelConfig
from mmtl.model.flops import flops_estimate
from mmtl.model.network import ModelParams, Prediction, forward_batch
from mmtl.telemetry.collectors import host_info

log = get_logger("bench")

MIN_RUNS = 100
MIN_WARMUP = 10
MIN_STREAM = 1000


def check_bench_args(runs: int, warmup: int) -> None:
    if runs < MIN_RUNS:
        raise ConfigError(f"bench runs must be >= {MIN_RUNS}, got {runs}")
    if warmup < MIN_WARMUP:
        raise ConfigError(f"bench warmup must be >= {MIN_WARMUP}, got {warmup}")


def _identity_stats(channels: int) -> NormalizerStats:
    return NormalizerStats(mean=np.zeros(channels), std=np.ones(channels))


def _forward_one(x: np.ndarray, params: ModelParams, config: ModelConfig) -> Prediction:
    out = forward_batch(x[None], params, config, "eval")
    return Prediction(
        activity_probs=None if out.probs is None else out.probs[0],
        resistance=None if out.resistance is None else float(out.resistance[0]),
    )


def raw_windows(windows: Sequence[LabeledWindow | np.ndarray],
                normalizer: NormalizerStats | None) -> list[np.ndarray]:
    """Undo the stored z-score so the timed path starts from sensor-scale input."""
    arrays = [w.window if isinstance(w, LabeledWindow) else np.asarray(w) for w in windows]
    if normalizer is None:
        return arrays
    return [invert_normalizer(a, normalizer) for a in arrays]


def bench(params: ModelParams, config: ModelConfig, windows: Sequence[LabeledWindow | np.ndarray], *,
          runs: int = 1000, warmup: int = 50, normalizer: NormalizerStats | None = None,
          rpa_percent: float | None = None, stream_windows: int = MIN_STREAM) -> BenchReport:
    check_bench_args(runs, warmup)
    if not windows:
        raise DataError("bench needs at least one window")
    stream_windows = max(stream_windows, MIN_STREAM)

    raw = raw_windows(windows, normalizer)
    stats = normalizer or _identity_stats(raw[0].shape[0])
    n = len(raw)

    rtr, lt = [], []
    predictions: list[Prediction] = []
    for i in range(warmup + runs):
        w = raw[i % n]
        t0 = time.perf_counter()
        x = apply_normalizer(denoise_array(w), stats)
        t1 = time.perf_counter()
        pred = _forward_one(x, params, config)
        t2 = time.perf_counter()
        if i < warmup:
            continue
        rtr.append(t2 - t1)
        lt.append(t2 - t0)
        if len(predictions) < n:
            predictions.append(pred)

    start = time.perf_counter()
    for i in range(stream_windows):
        _forward_one(apply_normalizer(denoise_array(raw[i % n]), stats), params, config)
    elapsed = time.perf_counter() - start

    rtr_ms = np.asarray(rtr) * 1000.0
    lt_ms = np.asarray(lt) * 1000.0
    cl = flops_estimate(config).gflops
    report = BenchReport(
        rtr_ms=float(np.median(rtr_ms)),
        lt_ms=float(np.median(lt_ms)),
        tp_fps=float(stream_windows / elapsed),
        cl_gflops=cl,
        mer=None if rpa_percent is None else float((rpa_percent / 100.0) / cl),
        runs=runs,
        warmup=warmup,
        stream_windows=stream_windows,
        rtr_p99_ms=float(np.percentile(rtr_ms, 99)),
        lt_p99_ms=float(np.percentile(lt_ms, 99)),
        rpa_percent=rpa_percent,
        host=host_info(),
        predictions=predictions,
    )
    if report.tp_fps > 1000.0 / report.rtr_ms * 1.05:
        log.warning("throughput %.1f fps exceeds inverse forward latency %.1f fps",
                    report.tp_fps, 1000.0 / report.rtr_ms)
    log.info("bench: RTR %.3f ms, LT %.3f ms, TP %.1f fps over %d runs",
             report.rtr_ms, report.lt_ms, report.tp_fps, runs)
    return report
