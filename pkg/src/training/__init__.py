"""Two-stage training protocol, pixel losses and the logistic baseline."""

from .baseline import (
    LogisticModel,
    descriptors_for,
    fit_logistic,
    fit_logistic_baseline,
    segmentation_descriptor,
)
from .losses import (
    LOSSES,
    cross_entropy_loss,
    image_loss,
    mse_loss,
    pixel_loss,
    segmentation_target,
)
from .pipeline import FoldResult, load_fold_model, train_cross_validation, train_fold
from .sampler import BalancedSampler, EpochAccounting, balanced_sampler
from .trainer import (
    LossTrace,
    parameter_digest,
    prepare_samples,
    train_decision,
    train_segmentation,
)

__all__ = [
    "LOSSES",
    "BalancedSampler",
    "EpochAccounting",
    "FoldResult",
    "LogisticModel",
    "LossTrace",
    "balanced_sampler",
    "cross_entropy_loss",
    "descriptors_for",
    "fit_logistic",
    "fit_logistic_baseline",
    "image_loss",
    "load_fold_model",
    "mse_loss",
    "parameter_digest",
    "pixel_loss",
    "prepare_samples",
    "segmentation_descriptor",
    "segmentation_target",
    "train_cross_validation",
    "train_decision",
    "train_fold",
    "train_segmentation",
]
