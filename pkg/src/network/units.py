"""Stateful layer units that chain the tensor primitives.

A ``ConvUnit`` is conv -> feature_norm -> ReLU (either of the last two may be
switched off); a ``PoolUnit`` is a 2x2 max-pool. Units cache what their
backward pass needs during a training-mode forward pass and keep the
gradients of their own parameters after ``backward``.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..common.errors import PreconditionFailedError
from ..tensor_core import (
    NormState,
    conv2d,
    conv2d_backward,
    feature_norm,
    feature_norm_backward,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
)

INIT_STDDEV = 0.01


@dataclass(frozen=True)
class ConvSpec:
    """Layout entry for a convolution unit."""

    name: str
    out_channels: int
    kernel: int
    norm: bool = True
    relu: bool = True


@dataclass(frozen=True)
class PoolSpec:
    """Layout entry for a 2x2 max-pool unit."""

    name: str


class ConvUnit:
    """Convolution followed by optional feature normalization and ReLU."""

    def __init__(
        self,
        spec: ConvSpec,
        in_channels: int,
        rng: np.random.Generator,
        dtype=np.float64,
    ):
        """Create a unit with N(0, 0.01) weights and zero biases.

        Args:
            spec: Layout entry
            in_channels: Number of input channels
            rng: Random generator used for the weights
            dtype: Parameter dtype
        """
        self.spec = spec
        self.name = spec.name
        self.in_channels = in_channels
        shape = (spec.out_channels, in_channels, spec.kernel, spec.kernel)
        self.weights = rng.normal(0.0, INIT_STDDEV, size=shape).astype(dtype)
        self.bias = np.zeros(spec.out_channels, dtype=dtype)
        self.norm: Optional[NormState] = (
            NormState.identity(spec.out_channels, dtype=dtype) if spec.norm else None
        )
        self.grads: Dict[str, np.ndarray] = {}
        self._cache: Optional[dict] = None

    def forward(self, x: np.ndarray, mode: str, update_stats: bool = True) -> np.ndarray:
        """Run the unit; caches intermediate tensors in train mode."""
        conv_out = conv2d(x, self.weights, self.bias)
        out = conv_out
        norm_cache = None
        if self.norm is not None:
            out, norm_cache = feature_norm(out, mode, self.norm, update_stats=update_stats)
        pre_relu = out
        if self.spec.relu:
            out = relu(out)
        self._cache = (
            {"input": x, "norm": norm_cache, "pre_relu": pre_relu} if mode == "train" else None
        )
        return out

    def backward(self, upstream: np.ndarray, need_input_grad: bool = True) -> Optional[np.ndarray]:
        """Backpropagate ``upstream`` and store parameter gradients in ``grads``.

        Raises:
            PreconditionFailedError: If no train-mode forward pass preceded the call
        """
        if self._cache is None:
            raise PreconditionFailedError(
                f"{self.name}: backward needs a preceding train-mode forward pass", unit=self.name
            )
        grad = upstream
        if self.spec.relu:
            grad = relu_backward(grad, self._cache["pre_relu"])
        if self.norm is not None:
            norm_grad = feature_norm_backward(grad, self._cache["norm"])
            self.grads["gamma"] = norm_grad.d_gamma
            self.grads["beta"] = norm_grad.d_beta
            grad = norm_grad.d_input
        layer_grad = conv2d_backward(
            self._cache["input"], self.weights, grad, need_input_grad=need_input_grad
        )
        self.grads["weight"] = layer_grad.d_weights
        self.grads["bias"] = layer_grad.d_bias
        return layer_grad.d_input

    def parameters(self) -> Dict[str, np.ndarray]:
        """Learnable tensors keyed by local name."""
        params = {"weight": self.weights, "bias": self.bias}
        if self.norm is not None:
            params["gamma"] = self.norm.gamma
            params["beta"] = self.norm.beta
        return params

    def buffers(self) -> Dict[str, np.ndarray]:
        """Running normalization statistics keyed by local name."""
        if self.norm is None:
            return {}
        return {"running_mean": self.norm.running_mean, "running_var": self.norm.running_var}

    def clear_cache(self) -> None:
        self._cache = None


class PoolUnit:
    """2x2 max-pool that remembers its argmax for the backward pass."""

    def __init__(self, spec: PoolSpec):
        self.spec = spec
        self.name = spec.name
        self._argmax: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray, mode: str, update_stats: bool = True) -> np.ndarray:
        del update_stats
        out, argmax = maxpool2(x)
        self._argmax = argmax if mode == "train" else None
        return out

    def backward(self, upstream: np.ndarray, need_input_grad: bool = True) -> np.ndarray:
        del need_input_grad
        if self._argmax is None:
            raise PreconditionFailedError(
                f"{self.name}: backward needs a preceding train-mode forward pass", unit=self.name
            )
        return maxpool2_backward(upstream, self._argmax)

    def parameters(self) -> Dict[str, np.ndarray]:
        return {}

    def buffers(self) -> Dict[str, np.ndarray]:
        return {}

    def clear_cache(self) -> None:
        self._argmax = None
