"""Rank-aware contrastive training for ordinal regression on a small numpy autodiff core."""

from .binning import BinSpec, DistanceKind, assign_bin, assign_bins, default_bins, label_distance, load_bins, save_bins
from .data import Dataset, SyntheticConfig, generate_synthetic, load_embeddings_csv, split, write_embeddings_csv
from .diagnostics import (
    DiscreteJoint,
    Metrics,
    MIReport,
    evaluate,
    exact_mi,
    gradient_suite,
    lambda_condition_check,
    verify_mi_bound,
)
from .losses import LossBreakdown, compute_lambda, fcrc, infonce, regression_loss, total_loss
from .model import ModelParams, forward, init_model, load_checkpoint, save_checkpoint
from .train import TrainConfig, TrainHistory, train

__all__ = [
    "BinSpec",
    "Dataset",
    "DiscreteJoint",
    "DistanceKind",
    "LossBreakdown",
    "MIReport",
    "Metrics",
    "ModelParams",
    "SyntheticConfig",
    "TrainConfig",
    "TrainHistory",
    "assign_bin",
    "assign_bins",
    "compute_lambda",
    "default_bins",
    "evaluate",
    "exact_mi",
    "fcrc",
    "forward",
    "generate_synthetic",
    "gradient_suite",
    "infonce",
    "init_model",
    "label_distance",
    "lambda_condition_check",
    "load_bins",
    "load_checkpoint",
    "load_embeddings_csv",
    "regression_loss",
    "save_bins",
    "save_checkpoint",
    "split",
    "total_loss",
    "train",
    "verify_mi_bound",
    "write_embeddings_csv",
]
