"""Logistic-regression baseline on a two-value segmentation descriptor.

The descriptor of an image is the global max and mean of its segmentation
logit map. It replaces the decision network when measuring how much the
decision network adds.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..common.errors import ValidationError
from ..dataio.sample import Sample
from ..network.model import SegmentationNet
from ..tensor_core import sigmoid

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-6
MAX_ITERATIONS = 10_000
LEARNING_RATE = 1.0


@dataclass
class LogisticModel:
    """Logistic regression in descriptor space: p = sigmoid(x . weights + bias)."""

    weights: np.ndarray
    bias: float
    iterations: int = 0
    converged: bool = False

    def decision_function(self, descriptors: np.ndarray) -> np.ndarray:
        return np.asarray(descriptors, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, descriptors: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(descriptors))


def segmentation_descriptor(seg_map: np.ndarray) -> np.ndarray:
    """(global max, global mean) of a logit map."""
    return np.array([float(np.max(seg_map)), float(np.mean(seg_map))], dtype=np.float64)


def fit_logistic(
    descriptors: np.ndarray,
    labels: Sequence[float],
    learning_rate: float = LEARNING_RATE,
    tolerance: float = GRADIENT_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> LogisticModel:
    """Fit logistic regression by full-batch gradient descent on the mean log-loss.

    Features are standardized internally; the returned weights act on raw
    descriptors. Descent stops when the gradient norm drops below
    ``tolerance`` or after ``max_iterations``.

    Raises:
        ValidationError: If only one class is present or shapes disagree
    """
    x = np.asarray(descriptors, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValidationError(
            f"Descriptors {x.shape} and labels {y.shape} do not match", field="descriptors"
        )
    if np.all(y == y[0]):
        raise ValidationError(
            "Logistic regression needs both classes in the training data", field="labels"
        )

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale

    weights = np.zeros(x.shape[1])
    bias = 0.0
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        residual = sigmoid(z @ weights + bias) - y
        grad_w = z.T @ residual / y.size
        grad_b = float(residual.mean())
        if np.sqrt(grad_w @ grad_w + grad_b**2) < tolerance:
            converged = True
            break
        weights -= learning_rate * grad_w
        bias -= learning_rate * grad_b

    raw_weights = weights / scale
    raw_bias = float(bias - raw_weights @ mean)
    logger.debug(
        "Logistic fit: %d iterations, converged=%s, weights=%s, bias=%.4f",
        iteration,
        converged,
        raw_weights,
        raw_bias,
    )
    return LogisticModel(raw_weights, raw_bias, iterations=iteration, converged=converged)


def descriptors_for(samples: Sequence[Sample], seg_net: SegmentationNet) -> np.ndarray:
    """N x 2 descriptor matrix from inference-mode segmentation maps."""
    rows = []
    for sample in samples:
        _, seg_map = seg_net.forward(sample.image, "infer")
        rows.append(segmentation_descriptor(seg_map))
    return np.vstack(rows) if rows else np.zeros((0, 2))


def fit_logistic_baseline(
    train_samples: Sequence[Sample], trained_seg_net: SegmentationNet
) -> LogisticModel:
    """Fit the baseline on the training fold, separately from the segmentation network."""
    descriptors = descriptors_for(train_samples, trained_seg_net)
    labels = [sample.target for sample in train_samples]
    return fit_logistic(descriptors, labels)
