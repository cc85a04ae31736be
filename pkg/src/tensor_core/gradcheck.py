"""Central finite-difference verification of hand-written backward passes."""

import logging
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from ..common.errors import ValidationError
from .tensor import Tensor

logger = logging.getLogger(__name__)


def numerical_gradient(fn: Callable[[], float], array: Tensor, eps: float = 1e-5) -> Tensor:
    """Central-difference gradient of a scalar function w.r.t. ``array``.

    ``array`` is perturbed in place, one entry at a time, and restored.
    """
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        f_plus = fn()
        flat[i] = original - eps
        f_minus = fn()
        flat[i] = original
        out[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def relative_error(analytic: Tensor, numeric: Tensor) -> float:
    """Norm-wise relative error ||a - n|| / (||a|| + ||n||), 0 when both vanish."""
    diff = float(np.linalg.norm(np.ravel(analytic) - np.ravel(numeric)))
    scale = float(np.linalg.norm(np.ravel(analytic)) + np.linalg.norm(np.ravel(numeric)))
    if scale == 0.0:
        return 0.0
    return diff / scale


def gradient_errors(
    forward: Callable[..., Tensor],
    backward: Callable[..., Dict[str, Tensor]],
    inputs: Dict[str, Tensor],
    eps: float = 1e-5,
    seed: int = 0,
    wrt: Optional[Iterable[str]] = None,
) -> Dict[str, float]:
    """Relative error of every analytic gradient against finite differences.

    The layer output is reduced to a scalar with a fixed random projection
    ``L = sum(out * u)``; ``backward(u, **inputs)`` must return the gradient of
    ``L`` for each named input.

    Args:
        forward: ``forward(**inputs) -> output``
        backward: ``backward(upstream, **inputs) -> {name: gradient}``
        inputs: Named float64 arrays (parameters and layer inputs alike)
        eps: Finite-difference step
        seed: Seed of the projection vector
        wrt: Names to check (default: every name ``backward`` returns)

    Returns:
        Mapping name -> relative error
    """
    for name, value in inputs.items():
        if isinstance(value, np.ndarray) and value.dtype != np.float64:
            raise ValidationError(
                f"Gradient checks need float64 inputs, '{name}' is {value.dtype}", field=name
            )

    rng = np.random.default_rng(seed)
    output = np.asarray(forward(**inputs))
    upstream = rng.standard_normal(output.shape)
    if upstream.ndim == 0:
        upstream = float(upstream)
    analytic = backward(upstream, **inputs)

    def objective() -> float:
        return float(np.sum(np.asarray(forward(**inputs)) * upstream))

    errors = {}
    for name in wrt if wrt is not None else analytic.keys():
        numeric = numerical_gradient(objective, inputs[name], eps)
        errors[name] = relative_error(analytic[name], numeric)
    logger.debug("Gradient check errors: %s", errors)
    return errors


def grad_check(
    forward: Callable[..., Tensor],
    backward: Callable[..., Dict[str, Tensor]],
    inputs: Dict[str, Tensor],
    eps: float = 1e-5,
    seed: int = 0,
) -> float:
    """Maximum relative gradient error over every parameter and input entry."""
    errors = gradient_errors(forward, backward, inputs, eps=eps, seed=seed)
    return max(errors.values()) if errors else 0.0
