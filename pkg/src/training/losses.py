"""Pixel losses on the segmentation logit map and the image-level loss."""

from typing import Tuple

import numpy as np

from ..common.errors import ShapeError
from ..common.registry import LossRegistry
from ..dataio.transforms import block_max
from ..network.model import SEGMENTATION_STRIDE
from ..tensor_core import sigmoid


def segmentation_target(mask: np.ndarray, stride: int = SEGMENTATION_STRIDE) -> np.ndarray:
    """1 x H/stride x W/stride target: a block is positive if any pixel in it is."""
    return block_max(mask, stride)[None].astype(np.float64)


def _check(logits: np.ndarray, target: np.ndarray) -> np.ndarray:
    target = np.asarray(target, dtype=logits.dtype)
    if target.ndim == logits.ndim - 1:
        target = target[None]
    if target.shape != logits.shape:
        raise ShapeError(
            f"Target shape {target.shape} does not match logit map shape {logits.shape}"
        )
    return target


def mse_loss(logits: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error on raw logits against 0/1 targets."""
    target = _check(logits, target)
    diff = logits - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def cross_entropy_loss(logits: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean sigmoid binary cross-entropy of logits against 0/1 targets."""
    target = _check(logits, target)
    loss = np.logaddexp(0.0, logits) - target * logits
    return float(np.mean(loss)), (sigmoid(logits) - target) / logits.size


def create_loss_registry() -> LossRegistry:
    registry = LossRegistry()
    registry.register_loss("mse", mse_loss)
    registry.register_loss("cross_entropy", cross_entropy_loss)
    return registry


LOSSES = create_loss_registry()


def pixel_loss(
    seg_logits: np.ndarray, target_mask: np.ndarray, loss_type: str
) -> Tuple[float, np.ndarray]:
    """Loss and its gradient w.r.t. the logit map.

    Args:
        seg_logits: 1 x h x w raw segmentation output
        target_mask: h x w (or 1 x h x w) target already reduced to map resolution
        loss_type: ``mse`` or ``cross_entropy``

    Raises:
        ShapeError: If target and map shapes differ
        ValueError: If the loss type is unknown
    """
    return LOSSES.get_loss(loss_type)(seg_logits, target_mask)


def image_loss(logit: float, target: float) -> Tuple[float, float]:
    """Sigmoid cross-entropy of the decision logit and its derivative."""
    loss = float(np.logaddexp(0.0, logit) - target * logit)
    return loss, float(sigmoid(np.float64(logit)) - target)
