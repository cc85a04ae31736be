"""Resolution reduction and rotation augmentation."""

import numpy as np

from ..common.errors import ShapeError
from .sample import Sample


def _blocks(array: np.ndarray, factor: int) -> np.ndarray:
    height, width = array.shape
    if factor < 1 or height % factor or width % factor:
        raise ShapeError(
            f"Size {height}x{width} is not divisible by {factor}",
            shape=[height, width],
            factor=factor,
        )
    return array.reshape(height // factor, factor, width // factor, factor)


def block_mean(array: np.ndarray, factor: int) -> np.ndarray:
    """Mean over non-overlapping ``factor`` x ``factor`` blocks."""
    return _blocks(np.asarray(array), factor).mean(axis=(1, 3))


def block_max(mask: np.ndarray, factor: int) -> np.ndarray:
    """A block is positive if any of its pixels is."""
    return _blocks(np.asarray(mask) > 0, factor).any(axis=(1, 3))


def downscale(sample: Sample, factor: int = 2) -> Sample:
    """Reduce resolution: image by block mean, mask by block max.

    Apply after annotation dilation, which works at the original resolution.
    """
    return sample.with_arrays(
        image=block_mean(sample.image, factor), mask=block_max(sample.mask, factor)
    )


def rotate90(sample: Sample) -> Sample:
    """Rotate image and mask by 90 degrees counter-clockwise."""
    return sample.with_arrays(
        image=np.ascontiguousarray(np.rot90(sample.image)),
        mask=np.ascontiguousarray(np.rot90(sample.mask)),
    )


def rotate90_augment(
    sample: Sample, probability: float = 0.5, rng: np.random.Generator = None
) -> Sample:
    """Rotate by 90 degrees with the given probability, otherwise return ``sample``.

    One uniform draw is consumed per call whatever the probability.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if rng.random() < probability:
        return rotate90(sample)
    return sample
