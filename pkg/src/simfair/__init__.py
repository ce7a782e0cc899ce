"""Similarity-weighted group fairness for multi-label classification.

The package provides similarity-weighted estimators of group-fairness
violations (demographic parity, equalized opportunity, and the family that
interpolates between them), an in-processing trainer that penalizes those
violations, multi-label F1 metrics, dataset tooling, and an experiment CLI.
"""

from .classifier import FairMultiLabelClassifier, TrainReport, evaluate
from .data import Dataset, LoadError, Manifest, SynthSpec, benchmark_spec, export_dataset, gen_synthetic, parse_manifest, rank_label_groups, subsample_advantaged
from .fairness import ViolationReport, dp_violation, eop_violation, simfair_violation, violation_gradient, weighted_group_mean, weighted_overall_mean
from .metrics import F1Report, example_f1, f1_report, macro_f1, micro_f1
from .network import Backbone, backward, bce_grad, bce_loss, init_backbone, load_backbone, save_backbone, threshold
from .optim import AdamState, adam_step, clip_grad_norm
from .similarity import SimilaritySpec, jaccard, sim, weights_for

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Backbone",
    "Dataset",
    "F1Report",
    "FairMultiLabelClassifier",
    "LoadError",
    "Manifest",
    "SimilaritySpec",
    "SynthSpec",
    "TrainReport",
    "ViolationReport",
    "adam_step",
    "backward",
    "bce_grad",
    "bce_loss",
    "benchmark_spec",
    "clip_grad_norm",
    "dp_violation",
    "eop_violation",
    "evaluate",
    "example_f1",
    "export_dataset",
    "f1_report",
    "gen_synthetic",
    "init_backbone",
    "jaccard",
    "load_backbone",
    "macro_f1",
    "micro_f1",
    "parse_manifest",
    "rank_label_groups",
    "save_backbone",
    "sim",
    "simfair_violation",
    "subsample_advantaged",
    "threshold",
    "violation_gradient",
    "weighted_group_mean",
    "weighted_overall_mean",
    "weights_for",
]
