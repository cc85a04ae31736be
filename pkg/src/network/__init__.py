"""Segmentation and decision networks, their accounting and weight files."""

from .model import (
    DECISION_LAYOUT,
    SEGMENTATION_LAYOUT,
    DecisionNet,
    DefectNet,
    SegmentationNet,
    build_decision_net,
    build_defect_net,
    build_segmentation_net,
    count_parameters,
    dec_forward,
    mac_count,
    probability_map,
    receptive_field,
    seg_forward,
)
from .units import ConvSpec, ConvUnit, PoolSpec, PoolUnit
from .weights import load_weights, save_weights

__all__ = [
    "DECISION_LAYOUT",
    "SEGMENTATION_LAYOUT",
    "ConvSpec",
    "ConvUnit",
    "DecisionNet",
    "DefectNet",
    "PoolSpec",
    "PoolUnit",
    "SegmentationNet",
    "build_decision_net",
    "build_defect_net",
    "build_segmentation_net",
    "count_parameters",
    "dec_forward",
    "load_weights",
    "mac_count",
    "probability_map",
    "receptive_field",
    "save_weights",
    "seg_forward",
]
