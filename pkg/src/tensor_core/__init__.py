"""Dense tensor primitives with hand-written forward/backward passes."""

from .gradcheck import gradient_errors, grad_check, numerical_gradient
from .layers import (
    NormCache,
    NormGrad,
    NormState,
    conv2d,
    conv2d_backward,
    feature_norm,
    feature_norm_backward,
    global_pool,
    global_pool_backward,
    linear,
    linear_backward,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
    sigmoid,
)
from .optim import ParamGroup, sgd_step
from .tensor import LayerGrad, Tensor, as_tensor, check_finite

__all__ = [
    "LayerGrad",
    "NormCache",
    "NormGrad",
    "NormState",
    "ParamGroup",
    "Tensor",
    "as_tensor",
    "check_finite",
    "conv2d",
    "conv2d_backward",
    "feature_norm",
    "feature_norm_backward",
    "global_pool",
    "global_pool_backward",
    "grad_check",
    "gradient_errors",
    "linear",
    "linear_backward",
    "maxpool2",
    "maxpool2_backward",
    "numerical_gradient",
    "relu",
    "relu_backward",
    "sgd_step",
    "sigmoid",
]
