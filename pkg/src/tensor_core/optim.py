"""Plain stochastic gradient descent over named parameter groups."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np

from ..common.errors import NumericError, ValidationError
from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class ParamGroup:
    """Parameters of one layer group with their gradients and freeze flag."""

    name: str
    params: Dict[str, Tensor]
    grads: Dict[str, Tensor] = field(default_factory=dict)
    frozen: bool = False


def sgd_step(groups: Iterable[ParamGroup], lr: float) -> int:
    """Apply ``p <- p - lr * g`` in place to every unfrozen parameter.

    All gradients are checked before any parameter changes, so a non-finite
    gradient leaves every parameter as it was.

    Args:
        groups: Parameter groups to update
        lr: Learning rate (0 leaves parameters unchanged)

    Returns:
        Number of parameter tensors updated

    Raises:
        ValidationError: If lr is negative or a gradient shape is wrong
        NumericError: If any gradient of an unfrozen group is NaN/Inf
    """
    if lr < 0 or not np.isfinite(lr):
        raise ValidationError(f"Learning rate must be non-negative, got {lr}", field="lr")

    active = [group for group in groups if not group.frozen]
    for group in active:
        for name, param in group.params.items():
            grad = group.grads.get(name)
            if grad is None:
                continue
            if np.shape(grad) != np.shape(param):
                raise ValidationError(
                    f"Gradient for {group.name}.{name} has shape {np.shape(grad)}, "
                    f"parameter has {np.shape(param)}",
                    field=f"{group.name}.{name}",
                )
            if not np.all(np.isfinite(grad)):
                raise NumericError(
                    f"Non-finite gradient for {group.name}.{name}; step aborted",
                    parameter=f"{group.name}.{name}",
                )

    updated = 0
    for group in active:
        for name, param in group.params.items():
            grad = group.grads.get(name)
            if grad is None:
                continue
            param -= (lr * grad).astype(param.dtype, copy=False)
            updated += 1
    logger.debug("SGD step lr=%s updated %d tensors", lr, updated)
    return updated
