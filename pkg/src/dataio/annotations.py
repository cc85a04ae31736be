"""Annotation variants derived from the pixel-precise masks.

``dilate<k>`` grows the mask with a k x k square; ``big`` and ``coarse``
replace every defect region with its axis-aligned or minimum-area rotated
bounding box. All variants are supersets of the original mask.
"""

import logging
from typing import Callable

import cv2
import numpy as np
from PIL import Image, ImageFilter

from ..common.errors import EmptyMaskError, ValidationError
from ..common.registry import AnnotationRegistry
from .sample import Sample

logger = logging.getLogger(__name__)

# Pixel centres on the rectangle boundary count as inside.
_INSIDE_TOLERANCE = 1e-6


def dilate_mask(mask: np.ndarray, kernel: int) -> np.ndarray:
    """Binary dilation with a ``kernel`` x ``kernel`` square structuring element.

    Raises:
        ValidationError: If ``kernel`` is not a positive odd integer
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ValidationError(f"Dilation kernel must be odd, got {kernel}", field="kernel")
    mask = np.asarray(mask) > 0
    if kernel == 1 or not mask.any():
        return mask.copy()
    img = Image.fromarray(mask.astype(np.uint8) * 255, mode="L")
    return np.asarray(img.filter(ImageFilter.MaxFilter(kernel))) > 0


def _rect_cover(points: np.ndarray, shape) -> np.ndarray:
    """Pixels whose centre lies inside the minimum-area rectangle of ``points``."""
    rect = cv2.minAreaRect(points.astype(np.float32))
    corners = cv2.boxPoints(rect).astype(np.float64)
    height, width = shape

    x0 = max(int(np.floor(corners[:, 0].min())) - 1, 0)
    x1 = min(int(np.ceil(corners[:, 0].max())) + 1, width)
    y0 = max(int(np.floor(corners[:, 1].min())) - 1, 0)
    y1 = min(int(np.ceil(corners[:, 1].max())) + 1, height)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    cx, cy = xs + 0.5, ys + 0.5

    # orientation-independent half-plane test against each edge
    center = corners.mean(axis=0)
    inside = np.ones(cx.shape, dtype=bool)
    for i in range(4):
        ax, ay = corners[i]
        bx, by = corners[(i + 1) % 4]
        edge_x, edge_y = bx - ax, by - ay
        length = np.hypot(edge_x, edge_y)
        if length == 0:
            continue
        side_center = edge_x * (center[1] - ay) - edge_y * (center[0] - ax)
        side = edge_x * (cy - ay) - edge_y * (cx - ax)
        if side_center < 0:
            side = -side
        inside &= side >= -_INSIDE_TOLERANCE * length

    cover = np.zeros(shape, dtype=bool)
    cover[y0:y1, x0:x1] = inside
    return cover


def _pixel_corners(mask: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    offsets = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=np.float64)
    pixels = np.stack([xs, ys], axis=1).astype(np.float64)
    return (pixels[:, None, :] + offsets[None, :, :]).reshape(-1, 2)


def make_box_annotation(mask: np.ndarray, rotated: bool) -> np.ndarray:
    """Fill the bounding box of the positive pixels.

    Args:
        mask: Binary mask with at least one positive pixel
        rotated: False for the axis-aligned box, True for the minimum-area
            rotated rectangle (rasterized by pixel-centre inclusion)

    Raises:
        EmptyMaskError: If the mask has no positive pixels
    """
    mask = np.asarray(mask) > 0
    if not mask.any():
        raise EmptyMaskError("Cannot build a box annotation from an empty mask")
    ys, xs = np.nonzero(mask)
    if not rotated:
        box = np.zeros_like(mask)
        box[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1] = True
        return box
    # rectangle spans the pixel squares, so every positive pixel centre is strictly inside
    return _rect_cover(_pixel_corners(mask), mask.shape) | mask


def box_per_region(mask: np.ndarray, rotated: bool) -> np.ndarray:
    """Box annotation applied to each 8-connected defect region separately."""
    mask = np.asarray(mask) > 0
    if not mask.any():
        return mask.copy()
    count, labels = cv2.connectedComponents(mask.astype(np.uint8), connectivity=8)
    result = np.zeros_like(mask)
    for region in range(1, count):
        result |= make_box_annotation(labels == region, rotated)
    return result


def _dilation(kernel: int) -> Callable[[np.ndarray], np.ndarray]:
    def build(mask: np.ndarray) -> np.ndarray:
        return dilate_mask(mask, kernel)

    build.__name__ = f"dilate{kernel}"
    return build


def _original(mask: np.ndarray) -> np.ndarray:
    return np.asarray(mask) > 0


def _big(mask: np.ndarray) -> np.ndarray:
    return box_per_region(mask, rotated=False)


def _coarse(mask: np.ndarray) -> np.ndarray:
    return box_per_region(mask, rotated=True)


def create_annotation_registry() -> AnnotationRegistry:
    """Registry holding every annotation kind."""
    registry = AnnotationRegistry()
    registry.register_annotation("original", _original)
    for kernel in (5, 9, 13, 17):
        registry.register_annotation(f"dilate{kernel}", _dilation(kernel))
    registry.register_annotation("big", _big)
    registry.register_annotation("coarse", _coarse)
    return registry


ANNOTATIONS = create_annotation_registry()


def apply_annotation(sample: Sample, kind: str) -> Sample:
    """Return ``sample`` with its mask replaced by the ``kind`` variant.

    Raises:
        ValidationError: If ``kind`` is unknown
    """
    if not ANNOTATIONS.is_registered(kind):
        raise ValidationError(
            f"Unknown annotation kind '{kind}'", field="annotation", allowed=ANNOTATIONS.list_keys()
        )
    return sample.with_arrays(mask=ANNOTATIONS.get_annotation(kind)(sample.mask))
