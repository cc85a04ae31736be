"""Segmentation and decision networks.

The segmentation network maps a grayscale image to a 1024-channel feature
volume and a single-channel logit map, both at 1/8 of the input resolution.
The decision network consumes both and returns one image-level score.

Layouts are data (tuples of ``ConvSpec``/``PoolSpec``) so that tests can build
narrow variants of the same topology; the default layouts are the full-size
networks.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..common.errors import PreconditionFailedError, ShapeError, ValidationError
from ..tensor_core import ParamGroup, global_pool, global_pool_backward, linear, sigmoid
from .units import INIT_STDDEV, ConvSpec, ConvUnit, PoolSpec, PoolUnit

logger = logging.getLogger(__name__)

LayoutEntry = Union[ConvSpec, PoolSpec]
Unit = Union[ConvUnit, PoolUnit]

SEGMENTATION_LAYOUT: Tuple[LayoutEntry, ...] = (
    ConvSpec("conv1", 32, 5),
    ConvSpec("conv2", 32, 5),
    PoolSpec("pool1"),
    ConvSpec("conv3", 64, 5),
    ConvSpec("conv4", 64, 5),
    ConvSpec("conv5", 64, 5),
    PoolSpec("pool2"),
    ConvSpec("conv6", 64, 5),
    ConvSpec("conv7", 64, 5),
    ConvSpec("conv8", 64, 5),
    ConvSpec("conv9", 64, 5),
    PoolSpec("pool3"),
    ConvSpec("conv10", 1024, 15),
    ConvSpec("conv11", 1, 1, norm=False, relu=False),
)

DECISION_LAYOUT: Tuple[LayoutEntry, ...] = (
    PoolSpec("pool1"),
    ConvSpec("conv1", 8, 5),
    PoolSpec("pool2"),
    ConvSpec("conv2", 16, 5),
    PoolSpec("pool3"),
    ConvSpec("conv3", 32, 5),
)

SEGMENTATION_STRIDE = 8
DECISION_STRIDE = 64
MODES = ("train", "infer")


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValidationError(f"Unknown mode '{mode}'", field="mode")


def _build_units(
    layout: Sequence[LayoutEntry], in_channels: int, rng: np.random.Generator, dtype
) -> List[Unit]:
    units: List[Unit] = []
    channels = in_channels
    for entry in layout:
        if isinstance(entry, PoolSpec):
            units.append(PoolUnit(entry))
        else:
            units.append(ConvUnit(entry, channels, rng, dtype=dtype))
            channels = entry.out_channels
    return units


class _UnitStack:
    """Shared bookkeeping of an ordered unit list."""

    group_name = "network"

    def __init__(self, units: List[Unit], dtype):
        self.units = units
        self.dtype = np.dtype(dtype)
        self.frozen = False

    def conv_units(self) -> Iterator[ConvUnit]:
        return (unit for unit in self.units if isinstance(unit, ConvUnit))

    def parameters(self) -> Dict[str, np.ndarray]:
        """All learnable tensors keyed ``<unit>.<name>``."""
        params = {}
        for unit in self.units:
            for name, value in unit.parameters().items():
                params[f"{unit.name}.{name}"] = value
        return params

    def buffers(self) -> Dict[str, np.ndarray]:
        """All running statistics keyed ``<unit>.<name>``."""
        buffers = {}
        for unit in self.units:
            for name, value in unit.buffers().items():
                buffers[f"{unit.name}.{name}"] = value
        return buffers

    def gradients(self) -> Dict[str, np.ndarray]:
        grads = {}
        for unit in self.units:
            if isinstance(unit, ConvUnit):
                for name, value in unit.grads.items():
                    grads[f"{unit.name}.{name}"] = value
        return grads

    def named_tensors(self) -> Dict[str, np.ndarray]:
        tensors = dict(self.parameters())
        tensors.update(self.buffers())
        return tensors

    def param_group(self) -> ParamGroup:
        """Parameters and current gradients as one SGD group."""
        return ParamGroup(
            name=self.group_name,
            params=self.parameters(),
            grads=self.gradients(),
            frozen=self.frozen,
        )

    def clear_cache(self) -> None:
        for unit in self.units:
            unit.clear_cache()


class SegmentationNet(_UnitStack):
    """Fully convolutional segmentation network.

    The feature volume handed to the decision network is the output of the
    second-to-last unit (after its normalization and ReLU); the last unit is
    the 1x1 convolution producing the raw logit map.
    """

    group_name = "segmentation"

    def __init__(self, units: List[Unit], dtype=np.float64):
        super().__init__(units, dtype)
        if not isinstance(units[-1], ConvUnit) or units[-1].spec.out_channels != 1:
            raise ShapeError("Segmentation layout must end in a single-channel convolution")

    @property
    def feature_channels(self) -> int:
        return self.units[-1].in_channels

    def forward(self, image: np.ndarray, mode: str = "infer") -> Tuple[np.ndarray, np.ndarray]:
        """Compute (features, seg_map) for one image.

        Args:
            image: H x W or 1 x H x W grayscale image in [0, 1]
            mode: ``train`` (per-image normalization, caches kept) or ``infer``

        Returns:
            (feature volume C x H/8 x W/8, raw logit map 1 x H/8 x W/8)

        Raises:
            ShapeError: If H or W is not divisible by 8
        """
        _check_mode(mode)
        x = np.asarray(image, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[0] != 1:
            raise ShapeError(f"Expected a 1 x H x W grayscale image, got {x.shape}")
        height, width = x.shape[1:]
        if height % SEGMENTATION_STRIDE or width % SEGMENTATION_STRIDE:
            raise ShapeError(
                f"Image size {height}x{width} must be a multiple of {SEGMENTATION_STRIDE}",
                required_multiple=SEGMENTATION_STRIDE,
                shape=[height, width],
            )
        update_stats = not self.frozen
        for unit in self.units[:-1]:
            x = unit.forward(x, mode, update_stats=update_stats)
        features = x
        seg_map = self.units[-1].forward(features, mode, update_stats=update_stats)
        return features, seg_map

    def backward(self, d_seg_map: np.ndarray) -> None:
        """Backpropagate a gradient on the logit map into every unit's ``grads``."""
        if self.frozen:
            raise PreconditionFailedError("Segmentation network is frozen")
        grad = d_seg_map
        for index in range(len(self.units) - 1, -1, -1):
            grad = self.units[index].backward(grad, need_input_grad=index > 0)


class DecisionNet(_UnitStack):
    """Image-level classifier on top of the segmentation outputs.

    The 66-entry head input is ``[max(last conv), mean(last conv),
    max(seg_map), mean(seg_map)]`` for the default 32-channel last conv.
    """

    group_name = "decision"

    def __init__(self, units: List[Unit], feature_channels: int, dtype=np.float64, rng=None):
        super().__init__(units, dtype)
        self.feature_channels = feature_channels
        last_channels = [u for u in units if isinstance(u, ConvUnit)][-1].spec.out_channels
        self.head_size = 2 * last_channels + 2
        rng = rng if rng is not None else np.random.default_rng(0)
        self.head_weights = rng.normal(0.0, INIT_STDDEV, size=self.head_size).astype(dtype)
        self.head_bias = np.zeros(1, dtype=dtype)
        self.head_grads: Dict[str, np.ndarray] = {}
        self._head_cache: Optional[dict] = None

    def forward(
        self, features: np.ndarray, seg_map: np.ndarray, mode: str = "infer"
    ) -> Tuple[float, float]:
        """Score one image.

        Returns:
            (score in (0, 1), logit)

        Raises:
            ShapeError: On spatial mismatch or sizes not divisible by 8
        """
        _check_mode(mode)
        if features.shape[1:] != seg_map.shape[1:]:
            raise ShapeError(
                f"Feature volume {features.shape} and segmentation map {seg_map.shape} "
                "differ in spatial size"
            )
        if features.shape[0] != self.feature_channels or seg_map.shape[0] != 1:
            raise ShapeError(
                f"Expected {self.feature_channels} feature channels and a 1-channel map, "
                f"got {features.shape[0]} and {seg_map.shape[0]}"
            )
        height, width = seg_map.shape[1:]
        reduction = DECISION_STRIDE // SEGMENTATION_STRIDE
        if height % reduction or width % reduction:
            raise ShapeError(
                f"Decision network needs image sizes divisible by {DECISION_STRIDE}",
                required_multiple=DECISION_STRIDE,
                map_shape=[height, width],
            )

        x = np.concatenate([features, seg_map], axis=0).astype(self.dtype, copy=False)
        for unit in self.units:
            x = unit.forward(x, mode)
        conv_max, conv_avg = global_pool(x)
        map_max, map_avg = global_pool(seg_map)
        head_input = np.concatenate([conv_max, conv_avg, map_max, map_avg])
        logit = linear(head_input, self.head_weights, float(self.head_bias[0]))
        self._head_cache = (
            {"head_input": head_input, "last": x, "last_channels": conv_max.shape[0]}
            if mode == "train"
            else None
        )
        return float(sigmoid(logit)), logit

    def backward(self, d_logit: float) -> None:
        """Backpropagate a gradient on the logit through the decision layers only."""
        if self._head_cache is None:
            raise PreconditionFailedError("Decision backward needs a train-mode forward pass")
        cache = self._head_cache
        self.head_grads = {
            "weight": d_logit * cache["head_input"],
            "bias": np.array([d_logit], dtype=self.dtype),
        }
        d_head = d_logit * self.head_weights
        channels = cache["last_channels"]
        d_max, d_avg = d_head[:channels], d_head[channels : 2 * channels]
        grad = global_pool_backward(d_max, d_avg, cache["last"])
        first_conv = next(i for i, u in enumerate(self.units) if isinstance(u, ConvUnit))
        for index in range(len(self.units) - 1, first_conv - 1, -1):
            grad = self.units[index].backward(grad, need_input_grad=index > first_conv)

    def parameters(self) -> Dict[str, np.ndarray]:
        params = super().parameters()
        params["head.weight"] = self.head_weights
        params["head.bias"] = self.head_bias
        return params

    def gradients(self) -> Dict[str, np.ndarray]:
        grads = super().gradients()
        for name, value in self.head_grads.items():
            grads[f"head.{name}"] = value
        return grads

    def clear_cache(self) -> None:
        super().clear_cache()
        self._head_cache = None


@dataclass
class DefectNet:
    """Both stages of the model, saved and loaded together."""

    segmentation: SegmentationNet
    decision: DecisionNet

    def named_tensors(self) -> Dict[str, np.ndarray]:
        tensors = {}
        for prefix, stage in (("segmentation", self.segmentation), ("decision", self.decision)):
            for name, value in stage.named_tensors().items():
                tensors[f"{prefix}.{name}"] = value
        return tensors

    def score(self, image: np.ndarray) -> Tuple[float, np.ndarray]:
        """Inference-mode score and logit map of one image."""
        features, seg_map = self.segmentation.forward(image, "infer")
        score, _ = self.decision.forward(features, seg_map, "infer")
        return score, seg_map


def build_segmentation_net(
    seed: int, layout: Sequence[LayoutEntry] = SEGMENTATION_LAYOUT, dtype=np.float64
) -> SegmentationNet:
    """Build the segmentation network with N(0, 0.01) weights and zero biases.

    The same seed always yields the same parameters.
    """
    rng = np.random.default_rng(seed)
    return SegmentationNet(_build_units(layout, 1, rng, dtype), dtype=dtype)


def build_decision_net(
    seed: int,
    feature_channels: int = 1024,
    layout: Sequence[LayoutEntry] = DECISION_LAYOUT,
    dtype=np.float64,
) -> DecisionNet:
    """Build the decision network for a given feature-volume width."""
    rng = np.random.default_rng(seed)
    units = _build_units(layout, feature_channels + 1, rng, dtype)
    return DecisionNet(units, feature_channels, dtype=dtype, rng=rng)


def build_defect_net(
    seed: int,
    segmentation_layout: Sequence[LayoutEntry] = SEGMENTATION_LAYOUT,
    decision_layout: Sequence[LayoutEntry] = DECISION_LAYOUT,
    dtype=np.float64,
) -> DefectNet:
    """Build both stages from one seed (independent streams per stage)."""
    seg_seed, dec_seed = np.random.SeedSequence(seed).generate_state(2)
    segmentation = build_segmentation_net(int(seg_seed), segmentation_layout, dtype)
    decision = build_decision_net(
        int(dec_seed), segmentation.feature_channels, decision_layout, dtype
    )
    return DefectNet(segmentation=segmentation, decision=decision)


def seg_forward(
    net: SegmentationNet, image: np.ndarray, mode: str = "infer"
) -> Tuple[np.ndarray, np.ndarray]:
    """Functional form of ``SegmentationNet.forward``."""
    return net.forward(image, mode)


def dec_forward(
    dnet: DecisionNet, features: np.ndarray, seg_map: np.ndarray, mode: str = "infer"
) -> float:
    """Score in (0, 1) for one image's segmentation outputs."""
    score, _ = dnet.forward(features, seg_map, mode)
    return score


def probability_map(seg_map: np.ndarray) -> np.ndarray:
    """Per-block defect probability, for visualization only."""
    return sigmoid(seg_map)


def _stages(net) -> List[_UnitStack]:
    if isinstance(net, DefectNet):
        return [net.segmentation, net.decision]
    return [net]


def count_parameters(net) -> int:
    """Exact learnable-parameter count (weights, biases, norm affine, head)."""
    return int(sum(value.size for stage in _stages(net) for value in stage.parameters().values()))


def _layout_of(net) -> List[Tuple[str, int]]:
    if isinstance(net, (list, tuple)):
        entries = net
    else:
        entries = [unit.spec for stage in _stages(net) for unit in stage.units]
    steps = []
    for entry in entries:
        if isinstance(entry, PoolSpec):
            steps.append(("pool", 2))
        else:
            steps.append(("conv", entry.kernel))
    return steps


def receptive_field(net) -> int:
    """Receptive field in input pixels by the recurrence r += (k-1)*j, j *= s.

    Args:
        net: A network or a layout sequence of ConvSpec/PoolSpec
    """
    field, jump = 1, 1
    for kind, size in _layout_of(net):
        field += (size - 1) * jump
        if kind == "pool":
            jump *= 2
    return field


def mac_count(net, height: int, width: int) -> int:
    """Analytic multiply-accumulate count of one forward pass.

    Covers every convolution of the given network(s); the decision network's
    first convolution sees the 1024 + 1 concatenated channels.
    """
    total = 0
    for stage in _stages(net):
        if isinstance(stage, DecisionNet):
            h, w = height // SEGMENTATION_STRIDE, width // SEGMENTATION_STRIDE
        else:
            h, w = height, width
        for unit in stage.units:
            if isinstance(unit, PoolUnit):
                h, w = h // 2, w // 2
            else:
                k = unit.spec.kernel
                total += k * k * unit.in_channels * unit.spec.out_channels * h * w
    return int(total)
