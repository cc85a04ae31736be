"""The ``Sample`` record shared by loading, annotation and training."""

from dataclasses import dataclass, replace

import numpy as np

from ..common.errors import DimensionMismatchError

DEFECTIVE = "defective"
NON_DEFECTIVE = "non-defective"


@dataclass(frozen=True, eq=False)
class Sample:
    """One grayscale surface image with its pixel mask.

    Attributes:
        image: H x W array in [0, 1]
        mask: H x W boolean array
        product_id: Physical product the image belongs to
        image_id: Unique image identifier
    """

    image: np.ndarray
    mask: np.ndarray
    product_id: str
    image_id: str

    def __post_init__(self):
        if self.image.shape != self.mask.shape:
            raise DimensionMismatchError(self.image_id, self.image.shape, self.mask.shape)
        if self.mask.dtype != np.bool_:
            object.__setattr__(self, "mask", self.mask > 0)

    @property
    def defective(self) -> bool:
        return bool(self.mask.any())

    @property
    def label(self) -> str:
        return DEFECTIVE if self.defective else NON_DEFECTIVE

    @property
    def target(self) -> float:
        """Image-level training target, 1.0 for defective images."""
        return 1.0 if self.defective else 0.0

    @property
    def shape(self):
        return self.image.shape

    def with_arrays(self, image: np.ndarray = None, mask: np.ndarray = None) -> "Sample":
        """Copy with the image and/or mask replaced."""
        return replace(
            self,
            image=self.image if image is None else image,
            mask=self.mask if mask is None else mask,
        )


def split_by_label(samples):
    """Return (defective, non_defective) lists, preserving order."""
    positives = [s for s in samples if s.defective]
    negatives = [s for s in samples if not s.defective]
    return positives, negatives
