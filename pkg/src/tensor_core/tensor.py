"""Tensor conventions shared by every layer primitive.

Activations are channels-first ``C x H x W`` arrays, convolution weights are
``outC x inC x k x k``. Tensors are plain numpy arrays; this module only adds
the checks that keep them finite and consistently typed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..common.errors import NumericError, ShapeError

Tensor = np.ndarray


@dataclass
class LayerGrad:
    """Gradients of one parameterised layer.

    ``d_input`` is None when the caller did not ask for it (the first layer of
    a frozen-input stage never needs it).
    """

    d_weights: Tensor
    d_bias: Tensor
    d_input: Optional[Tensor] = None


def as_tensor(data, dtype=np.float64) -> Tensor:
    """Convert array-like data to a contiguous tensor of the given dtype."""
    return np.ascontiguousarray(data, dtype=dtype)


def check_finite(tensor: Tensor, name: str = "tensor") -> Tensor:
    """Raise NumericError if ``tensor`` holds NaN or Inf.

    Returns:
        The tensor itself, for chaining
    """
    if not np.all(np.isfinite(tensor)):
        bad = int(np.size(tensor) - np.count_nonzero(np.isfinite(tensor)))
        raise NumericError(f"{name} has {bad} non-finite values", name=name, count=bad)
    return tensor


def require_rank(tensor: Tensor, rank: int, name: str) -> None:
    """Raise ShapeError unless ``tensor`` has exactly ``rank`` dimensions."""
    if np.ndim(tensor) != rank:
        raise ShapeError(
            f"{name} must be rank {rank}, got shape {np.shape(tensor)}",
            name=name,
            shape=list(np.shape(tensor)),
        )
