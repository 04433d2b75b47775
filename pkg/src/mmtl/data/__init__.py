"""Dataset parsing, preprocessing, resistance targets, augmentation and splits."""
from mmtl.data.augment import augment, rebalance
from mmtl.data.datasets import DATASETS, DatasetInfo, get_dataset
from mmtl.data.parsers import parse_mhealth, parse_uci_features, parse_uci_har, parse_wisdm
from mmtl.data.pipeline import DatasetConfig, PreparedData, make_splits, prepare_dataset, split
from mmtl.data.preprocess import apply_normalizer, denoise, fit_normalizer, segment
from mmtl.data.resistance import SCHEME_ID, synthesize_resistance
from mmtl.data.types import LabeledWindow, NormalizerStats, ParseSummary, Recording

__all__ = [
    "DATASETS", "SCHEME_ID", "DatasetConfig", "DatasetInfo", "LabeledWindow", "NormalizerStats",
    "ParseSummary", "PreparedData", "Recording", "apply_normalizer", "augment", "denoise",
    "fit_normalizer", "get_dataset", "make_splits", "parse_mhealth", "parse_uci_features",
    "parse_uci_har", "parse_wisdm", "prepare_dataset", "rebalance", "segment", "split",
    "synthesize_resistance",
]
