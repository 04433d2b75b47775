"""Classification, resistance and efficiency metrics, benchmark and ablation suite."""
from mmtl.metrics.ablation import LABELS, AblationRow, AblationTable, ablation_suite
from mmtl.metrics.bench import bench
from mmtl.metrics.classification import auc_roc, classification_metrics, confusion_matrix
from mmtl.metrics.evaluate import evaluate, predict_batch
from mmtl.metrics.regression import regression_metrics, resistance_by_class
from mmtl.metrics.report import DEFAULT_TAU, FER_FLOOR, BenchReport, MetricsReport

__all__ = [
    "DEFAULT_TAU", "FER_FLOOR", "LABELS", "AblationRow", "AblationTable", "BenchReport",
    "MetricsReport", "ablation_suite", "auc_roc", "bench", "classification_metrics",
    "confusion_matrix", "evaluate", "predict_batch", "regression_metrics", "resistance_by_class",
]
