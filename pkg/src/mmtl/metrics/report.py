"""Report records for evaluation and benchmarking, serialized with a stable key schema."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any

from mmtl.data.resistance import SCHEME_ID

DEFAULT_TAU = 0.10
FER_FLOOR = 0.05
PC_NOT_MEASURED = "not measured"


@dataclass
class MetricsReport:
    """Evaluation metrics; a field is None when its task was not evaluated."""
    samples: int = 0
    accuracy: float | None = None
    precision: list[float] | None = None
    recall: list[float] | None = None
    f1: list[float] | None = None
    macro_precision: float | None = None
    macro_recall: float | None = None
    macro_f1: float | None = None
    confusion: list[list[int]] | None = None
    auc_roc: float | None = None
    mae: float | None = None
    rmse: float | None = None
    fer_percent: float | None = None
    rpa_percent: float | None = None
    tau: float | None = None
    fer_floor: float | None = None
    resistance_by_class: dict[str, dict[str, float]] | None = None
    class_names: list[str] | None = None
    resistance_scheme: str = SCHEME_ID

    def merge(self, other: MetricsReport) -> MetricsReport:
        """Fill this report's empty fields from `other`."""
        values = {}
        for f in fields(self):
            mine = getattr(self, f.name)
            values[f.name] = getattr(other, f.name) if mine is None else mine
        values["samples"] = max(self.samples, other.samples)
        return MetricsReport(**values)

    def missing(self) -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name) is None]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class BenchReport:
    rtr_ms: float
    lt_ms: float
    tp_fps: float
    cl_gflops: float
    mer: float | None
    runs: int
    warmup: int
    stream_windows: int
    rtr_p99_ms: float = 0.0
    lt_p99_ms: float = 0.0
    rpa_percent: float | None = None
    host: dict[str, Any] = field(default_factory=dict)
    predictions: list = field(default_factory=list, repr=False, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "RTR_ms": self.rtr_ms,
            "LT_ms": self.lt_ms,
            "TP_fps": self.tp_fps,
            "CL_gflops": self.cl_gflops,
            "MER": self.mer,
            "PC_watts": PC_NOT_MEASURED,
            "RTR_p99_ms": self.rtr_p99_ms,
            "LT_p99_ms": self.lt_p99_ms,
            "rpa_percent": self.rpa_percent,
            "runs": self.runs,
            "warmup": self.warmup,
            "stream_windows": self.stream_windows,
            "host": self.host,
        }
