"""Ablation suite: the full model against four single-component removals under one budget."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import pandas as pd

from mmtl.data.types import LabeledWindow
from mmtl.log import get_logger
from mmtl.metrics.evaluate import evaluate
from mmtl.metrics.report import DEFAULT_TAU, FER_FLOOR, MetricsReport
from mmtl.model.config import ModelConfig
from mmtl.model.flops import flops_estimate, match_plain_width
from mmtl.model.network import count_params
from mmtl.training.config import TrainConfig
from mmtl.training.loop import train

log = get_logger("ablation")

FULL = "Full Model"
NO_MOBILENET = "Without MobileNetV3"
NO_MTL = "Without MTL Module"
NO_SE = "Without SE Module"
NO_SWISH = "Without Swish Activation Function"
LABELS = (FULL, NO_MOBILENET, NO_MTL, NO_SE, NO_SWISH)

CSV_COLUMNS = ("configuration", "accuracy", "macro_precision", "macro_recall", "macro_f1",
               "auc_roc", "mae", "rmse", "fer_percent", "rpa_percent", "params", "mul_adds",
               "epochs_run", "epoch_budget", "seed")


@dataclass
class AblationRow:
    label: str
    report: MetricsReport
    params: int
    mul_adds: int
    epochs_run: int
    epoch_budget: int
    seed: int

    def flat(self) -> dict[str, Any]:
        r = self.report
        return {
            "configuration": self.label, "accuracy": r.accuracy,
            "macro_precision": r.macro_precision, "macro_recall": r.macro_recall,
            "macro_f1": r.macro_f1, "auc_roc": r.auc_roc, "mae": r.mae, "rmse": r.rmse,
            "fer_percent": r.fer_percent, "rpa_percent": r.rpa_percent, "params": self.params,
            "mul_adds": self.mul_adds, "epochs_run": self.epochs_run,
            "epoch_budget": self.epoch_budget, "seed": self.seed,
        }


@dataclass
class AblationTable:
    rows: list[AblationRow]
    margin_points: float = 2.0
    violations: list[str] = field(default_factory=list)

    def row(self, label: str) -> AblationRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self) -> dict[str, Any]:
        return {
            "margin_points": self.margin_points,
            "violations": list(self.violations),
            "rows": [{**r.flat(), "report": r.report.to_dict()} for r in self.rows],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.flat() for r in self.rows], columns=list(CSV_COLUMNS))

    def to_csv(self, path: str | Path | None = None) -> str:
        text = self.to_frame().to_csv(index=False)
        if path is not None:
            Path(path).write_text(text)
        return text


def ablation_configs(base: ModelConfig) -> dict[str, list[ModelConfig]]:
    """Model configs per row; the no-MTL row trains one single-task model per head."""
    plain_width = match_plain_width(base)
    return {
        FULL: [base],
        NO_MOBILENET: [replace(base, backbone="plain", plain_channels=plain_width)],
        NO_MTL: [replace(base, enable_mtl=False, task="activity"),
                 replace(base, enable_mtl=False, task="resistance")],
        NO_SE: [replace(base, enable_se=False)],
        NO_SWISH: [replace(base, enable_swish=False)],
    }


def check_ordering(rows: Sequence[AblationRow], margin_points: float) -> list[str]:
    """Rows whose macro F1 beats the full model by more than the margin."""
    full = next(r for r in rows if r.label == FULL)
    out = []
    for r in rows:
        if r.label == FULL or r.report.macro_f1 is None or full.report.macro_f1 is None:
            continue
        gap = 100.0 * (r.report.macro_f1 - full.report.macro_f1)
        if gap > margin_points:
            out.append(f"{r.label}: macro F1 {100 * r.report.macro_f1:.2f} exceeds "
                       f"{FULL} {100 * full.report.macro_f1:.2f} by {gap:.2f} points")
    return out


def ablation_suite(base_config: ModelConfig, train_set: Sequence[LabeledWindow],
                   val_set: Sequence[LabeledWindow], test_set: Sequence[LabeledWindow],
                   train_cfg: TrainConfig, *, class_names: Sequence[str] | None = None,
                   tau: float = DEFAULT_TAU, fer_floor: float = FER_FLOOR,
                   margin_points: float = 2.0) -> AblationTable:
    rows = []
    for label, configs in ablation_configs(base_config).items():
        report: MetricsReport | None = None
        params = mul_adds = epochs_run = 0
        for cfg in configs:
            log.info("ablation %s: training %s/%s model", label, cfg.backbone, cfg.task)
            ckpt, history = train(cfg, train_cfg, train_set, val_set)
            part = evaluate(ckpt.params, ckpt.model_config, test_set, class_names=class_names,
                            tau=tau, fer_floor=fer_floor)
            report = part if report is None else report.merge(part)
            params += count_params(ckpt.params)
            mul_adds += flops_estimate(cfg).mul_adds
            epochs_run = max(epochs_run, history.last_epoch)
        rows.append(AblationRow(label, report, params, mul_adds, epochs_run,
                                train_cfg.epochs, train_cfg.seed))

    table = AblationTable(rows, margin_points, check_ordering(rows, margin_points))
    for v in table.violations:
        log.warning("ablation ordering: %s", v)
    return table
