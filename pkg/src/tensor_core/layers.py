"""Forward and backward passes of the layer primitives.

Every function is pure over its arguments except ``feature_norm`` in train
mode, which updates the running statistics held in its ``NormState``.
Convolutions are stride 1 with "same" zero padding, so only ``maxpool2``
changes spatial resolution.
"""

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..common.errors import ShapeError, ValidationError
from .tensor import LayerGrad, Tensor, require_rank

NORM_EPSILON = 1e-5
NORM_MOMENTUM = 0.99

# upper bound on im2col block size, in elements
_IM2COL_BLOCK = 1 << 23


def _check_conv_args(input: Tensor, weights: Tensor, bias: Tensor) -> int:
    require_rank(input, 3, "input")
    require_rank(weights, 4, "weights")
    out_channels, in_channels, k_h, k_w = weights.shape
    if k_h != k_w or k_h % 2 == 0:
        raise ShapeError(
            f"Kernel must be square with odd size, got {k_h}x{k_w}", kernel=[k_h, k_w]
        )
    if in_channels != input.shape[0]:
        raise ShapeError(
            f"Input has {input.shape[0]} channels but weights expect {in_channels}",
            input_channels=input.shape[0],
            weight_channels=in_channels,
        )
    if np.shape(bias) != (out_channels,):
        raise ShapeError(
            f"Bias must have shape ({out_channels},), got {np.shape(bias)}",
            bias_shape=list(np.shape(bias)),
        )
    return k_h


def _row_blocks(height: int, width: int, patch: int) -> Iterator[Tuple[int, int]]:
    rows = max(1, _IM2COL_BLOCK // max(1, width * patch))
    for start in range(0, height, rows):
        yield start, min(height, start + rows)


def _im2col_rows(windows: np.ndarray, y0: int, y1: int) -> np.ndarray:
    # windows: C x H x W x k x k view -> (rows*W) x (C*k*k) matrix
    block = windows[:, y0:y1]
    channels, rows, width, k, _ = block.shape
    return block.transpose(1, 2, 0, 3, 4).reshape(rows * width, channels * k * k)


def _windows(input: Tensor, k: int) -> np.ndarray:
    pad = (k - 1) // 2
    padded = np.pad(input, ((0, 0), (pad, pad), (pad, pad)))
    return sliding_window_view(padded, (k, k), axis=(1, 2))


def conv2d(input: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Same-padded, stride-1 2-D convolution (cross-correlation).

    Args:
        input: C x H x W activations
        weights: O x C x k x k kernels, k odd
        bias: length-O vector

    Returns:
        O x H x W output

    Raises:
        ShapeError: If channel counts, kernel or bias shapes disagree
    """
    k = _check_conv_args(input, weights, bias)
    channels, height, width = input.shape
    out_channels = weights.shape[0]
    dtype = np.result_type(input, weights)
    w_mat = weights.reshape(out_channels, channels * k * k)

    if k == 1:
        out = (w_mat @ input.reshape(channels, height * width)).reshape(out_channels, height, width)
        return out + bias.reshape(out_channels, 1, 1)

    windows = _windows(input, k)
    out = np.empty((out_channels, height, width), dtype=dtype)
    for y0, y1 in _row_blocks(height, width, channels * k * k):
        cols = _im2col_rows(windows, y0, y1)
        out[:, y0:y1] = (w_mat @ cols.T).reshape(out_channels, y1 - y0, width)
    out += bias.reshape(out_channels, 1, 1)
    return out


def conv2d_backward(
    input: Tensor, weights: Tensor, upstream_grad: Tensor, need_input_grad: bool = True
) -> LayerGrad:
    """Exact gradients of ``conv2d`` with respect to weights, bias and input.

    The input gradient is the same-padded convolution of the upstream
    gradient with the spatially flipped, channel-transposed kernels.

    Args:
        input: Forward input, C x H x W
        weights: Forward weights, O x C x k x k
        upstream_grad: Gradient of the loss w.r.t. the forward output, O x H x W
        need_input_grad: Skip the input gradient when False

    Returns:
        LayerGrad with shapes matching the forward arguments

    Raises:
        ShapeError: If ``upstream_grad`` does not match the forward output shape
    """
    out_channels = weights.shape[0]
    k = _check_conv_args(input, weights, np.zeros(out_channels))
    channels, height, width = input.shape
    if upstream_grad.shape != (out_channels, height, width):
        raise ShapeError(
            f"Upstream gradient shape {upstream_grad.shape} does not match "
            f"forward output {(out_channels, height, width)}",
            upstream_shape=list(upstream_grad.shape),
        )

    d_bias = upstream_grad.sum(axis=(1, 2))
    g_mat = upstream_grad.reshape(out_channels, height * width)

    if k == 1:
        d_w = g_mat @ input.reshape(channels, height * width).T
    else:
        windows = _windows(input, k)
        d_w = np.zeros((out_channels, channels * k * k), dtype=np.result_type(input, upstream_grad))
        for y0, y1 in _row_blocks(height, width, channels * k * k):
            cols = _im2col_rows(windows, y0, y1)
            d_w += g_mat[:, y0 * width : y1 * width] @ cols
    d_weights = d_w.reshape(weights.shape)

    d_input = None
    if need_input_grad:
        flipped = np.ascontiguousarray(weights.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        d_input = conv2d(upstream_grad, flipped, np.zeros(channels, dtype=flipped.dtype))
    return LayerGrad(d_weights=d_weights, d_bias=d_bias, d_input=d_input)


def _pool_blocks(input: Tensor) -> np.ndarray:
    channels, height, width = input.shape
    blocks = input.reshape(channels, height // 2, 2, width // 2, 2).transpose(0, 1, 3, 2, 4)
    return blocks.reshape(channels, height // 2, width // 2, 4)


def maxpool2(input: Tensor) -> Tuple[Tensor, np.ndarray]:
    """2x2 max pooling with stride 2.

    Ties go to the first index of the window in row-major order.

    Returns:
        (pooled C x H/2 x W/2 tensor, argmax indices 0..3 per output)

    Raises:
        ShapeError: If H or W is odd
    """
    require_rank(input, 3, "input")
    _, height, width = input.shape
    if height % 2 or width % 2:
        raise ShapeError(
            f"maxpool2 needs even spatial size, got {height}x{width}", shape=[height, width]
        )
    blocks = _pool_blocks(input)
    argmax = blocks.argmax(axis=-1)
    pooled = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    return pooled, argmax.astype(np.int8)


def maxpool2_backward(upstream_grad: Tensor, argmax: np.ndarray) -> Tensor:
    """Route pooled gradients back to the stored argmax positions."""
    if upstream_grad.shape != argmax.shape:
        raise ShapeError(
            "Upstream gradient and argmax shapes differ",
            upstream_shape=list(upstream_grad.shape),
            argmax_shape=list(argmax.shape),
        )
    channels, half_h, half_w = upstream_grad.shape
    blocks = np.zeros((channels, half_h, half_w, 4), dtype=upstream_grad.dtype)
    np.put_along_axis(blocks, argmax[..., None].astype(np.intp), upstream_grad[..., None], axis=-1)
    grad = blocks.reshape(channels, half_h, half_w, 2, 2).transpose(0, 1, 3, 2, 4)
    return grad.reshape(channels, half_h * 2, half_w * 2)


@dataclass
class NormState:
    """Learnable affine parameters and running statistics of one normalization."""

    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    momentum: float = NORM_MOMENTUM
    epsilon: float = NORM_EPSILON

    @classmethod
    def identity(cls, channels: int, dtype=np.float64) -> "NormState":
        """gamma=1, beta=0, running mean 0 and variance 1."""
        return cls(
            gamma=np.ones(channels, dtype=dtype),
            beta=np.zeros(channels, dtype=dtype),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
        )


@dataclass
class NormCache:
    """What ``feature_norm_backward`` needs from the forward pass."""

    normalized: Tensor
    inv_std: Tensor
    gamma: Tensor
    train: bool


@dataclass
class NormGrad:
    """Gradients of ``feature_norm``."""

    d_input: Tensor
    d_gamma: Tensor
    d_beta: Tensor


def feature_norm(
    input: Tensor, stats_mode: str, state: NormState, update_stats: bool = True
) -> Tuple[Tensor, NormCache]:
    """Per-channel normalization followed by a learnable affine transform.

    In ``train`` mode each channel is normalized by its own spatial mean and
    (biased) variance over H x W, and the running statistics move towards them
    with ``state.momentum``. In ``infer`` mode the running statistics are used.
    A 1 x 1 grid has no spatial spread, so train mode falls back to the running
    statistics there (and leaves them unchanged).

    Args:
        input: C x H x W activations
        stats_mode: ``"train"`` or ``"infer"``
        state: Affine parameters and running statistics (updated in train mode)
        update_stats: Set False to leave running statistics untouched in train mode

    Returns:
        (normalized output, cache for the backward pass)
    """
    require_rank(input, 3, "input")
    if stats_mode not in ("train", "infer"):
        raise ValidationError(f"Unknown stats_mode '{stats_mode}'", field="stats_mode")
    channels = input.shape[0]
    if state.gamma.shape != (channels,):
        raise ShapeError(
            f"Normalization state has {state.gamma.shape[0]} channels, input has {channels}"
        )

    spatial = input.shape[1] * input.shape[2]
    train = stats_mode == "train" and spatial > 1
    if train:
        mean = input.mean(axis=(1, 2))
        var = input.var(axis=(1, 2))
        if update_stats:
            state.running_mean *= state.momentum
            state.running_mean += (1.0 - state.momentum) * mean
            state.running_var *= state.momentum
            state.running_var += (1.0 - state.momentum) * var
    else:
        mean = state.running_mean
        var = state.running_var

    inv_std = 1.0 / np.sqrt(var + state.epsilon)
    normalized = (input - mean[:, None, None]) * inv_std[:, None, None]
    out = state.gamma[:, None, None] * normalized + state.beta[:, None, None]
    cache = NormCache(normalized=normalized, inv_std=inv_std, gamma=state.gamma.copy(), train=train)
    return out, cache


def feature_norm_backward(upstream_grad: Tensor, cache: NormCache) -> NormGrad:
    """Gradients of ``feature_norm`` for the mode used in the forward pass."""
    if upstream_grad.shape != cache.normalized.shape:
        raise ShapeError("Upstream gradient does not match the normalized tensor shape")
    d_beta = upstream_grad.sum(axis=(1, 2))
    d_gamma = (upstream_grad * cache.normalized).sum(axis=(1, 2))
    d_norm = upstream_grad * cache.gamma[:, None, None]
    inv_std = cache.inv_std[:, None, None]

    if cache.train:
        mean_d = d_norm.mean(axis=(1, 2), keepdims=True)
        mean_dx = (d_norm * cache.normalized).mean(axis=(1, 2), keepdims=True)
        d_input = inv_std * (d_norm - mean_d - cache.normalized * mean_dx)
    else:
        d_input = d_norm * inv_std
    return NormGrad(d_input=d_input, d_gamma=d_gamma, d_beta=d_beta)


def relu(input: Tensor) -> Tensor:
    """Elementwise max(0, x)."""
    return np.maximum(input, 0)


def relu_backward(upstream_grad: Tensor, input: Tensor) -> Tensor:
    """Pass the gradient where the forward input was strictly positive."""
    return upstream_grad * (input > 0)


def global_pool(input: Tensor) -> Tuple[Tensor, Tensor]:
    """Per-channel global max and mean over H x W.

    Returns:
        (max vector of length C, mean vector of length C)
    """
    require_rank(input, 3, "input")
    flat = input.reshape(input.shape[0], -1)
    if flat.shape[1] == 0:
        raise ShapeError("global_pool needs a non-empty spatial extent")
    return flat.max(axis=1), flat.mean(axis=1)


def global_pool_backward(d_max: Tensor, d_avg: Tensor, input: Tensor) -> Tensor:
    """Gradient of ``global_pool``.

    The max gradient goes to the first argmax of each channel, the average
    gradient is spread uniformly with weight 1/(H*W).
    """
    channels = input.shape[0]
    flat = input.reshape(channels, -1)
    count = flat.shape[1]
    grad = np.empty_like(flat, dtype=np.result_type(input, d_max, d_avg))
    grad[:] = (np.asarray(d_avg) / count)[:, None]
    grad[np.arange(channels), flat.argmax(axis=1)] += d_max
    return grad.reshape(input.shape)


def linear(input: Tensor, weights: Tensor, bias: float) -> float:
    """Dot product plus bias.

    Raises:
        ShapeError: If ``input`` and ``weights`` differ in length
    """
    if np.shape(input) != np.shape(weights) or np.ndim(input) != 1:
        raise ShapeError(
            f"linear needs equal-length vectors, got {np.shape(input)} and {np.shape(weights)}"
        )
    return float(np.dot(input, weights) + bias)


def linear_backward(input: Tensor, weights: Tensor, upstream_grad: float) -> LayerGrad:
    """Gradients of ``linear`` for a scalar upstream gradient."""
    return LayerGrad(
        d_weights=upstream_grad * np.asarray(input),
        d_bias=np.asarray(upstream_grad, dtype=np.result_type(input, weights)),
        d_input=upstream_grad * np.asarray(weights),
    )


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x)
    x = x.astype(np.result_type(x, np.float32), copy=False)
    return np.exp(-np.logaddexp(0.0, -x))
