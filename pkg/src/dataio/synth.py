"""Seeded synthetic surface-defect corpus.

Non-defective images are a textured background: low-frequency noise plus
fine grain around a random base level. Defective images add a thin random
polyline crack, darker or brighter than the surface. The crack mask is
rasterized once and used both to paint the image and as the label, so it
covers the crack pixels exactly.

Images are grouped into products of ``images_per_product`` and written in
the loader's layout, together with a JSON-lines manifest.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import cv2
import numpy as np
from PIL import Image

from ..common.errors import DataError, ValidationError
from .loader import write_manifest

logger = logging.getLogger(__name__)

SIZE_MULTIPLE = 64
IMAGES_PER_PRODUCT = 3
MASK_SUFFIX = "_label"

CRACK_WIDTH_RANGE = (1, 4)
CRACK_CONTRAST_RANGE = (0.2, 0.4)
CRACK_VERTEX_RANGE = (3, 6)
GRAIN_STDDEV = 0.03
NOISE_CELL = 16


@dataclass
class RenderedSample:
    """One generated image before quantization."""

    image: np.ndarray
    mask: np.ndarray
    background: np.ndarray
    polyline: np.ndarray
    width: int


@dataclass
class SynthCorpus:
    """Where a generated corpus was written and what it contains."""

    root: Path
    manifest_path: Path
    n_pos: int
    n_neg: int
    products: int


def _normalize_size(size: Union[int, Tuple[int, int]]) -> Tuple[int, int]:
    height, width = (size, size) if isinstance(size, int) else tuple(size)
    if height <= 0 or width <= 0 or height % SIZE_MULTIPLE or width % SIZE_MULTIPLE:
        raise ValidationError(
            f"Image size {height}x{width} must be a positive multiple of {SIZE_MULTIPLE}",
            field="size",
        )
    return height, width


def render_background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Textured surface in [0, 1]."""
    cells = rng.random((height // NOISE_CELL + 2, width // NOISE_CELL + 2))
    coarse = Image.fromarray((cells * 255).astype(np.uint8), mode="L")
    low_freq = np.asarray(coarse.resize((width, height), resample=Image.BICUBIC), dtype=np.float64)
    low_freq = (low_freq / 255.0 - 0.5) * 0.25
    base = rng.uniform(0.35, 0.65)
    grain = rng.normal(0.0, GRAIN_STDDEV, size=(height, width))
    return np.clip(base + low_freq + grain, 0.0, 1.0)


def render_crack(
    rng: np.random.Generator, height: int, width: int
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Random polyline crack; returns (mask, vertices, width)."""
    vertices = rng.integers(*CRACK_VERTEX_RANGE, endpoint=True)
    start = np.array([rng.uniform(0.1, 0.9) * width, rng.uniform(0.1, 0.9) * height])
    heading = rng.uniform(0, 2 * np.pi)
    step = 0.08 * min(height, width)
    points = [start]
    for _ in range(vertices - 1):
        heading += rng.normal(0.0, 0.6)
        direction = np.array([np.cos(heading), np.sin(heading)])
        nxt = points[-1] + step * rng.uniform(0.5, 1.5) * direction
        points.append(np.clip(nxt, [0, 0], [width - 1, height - 1]))
    polyline = np.round(np.array(points)).astype(np.int32)
    thickness = int(rng.integers(*CRACK_WIDTH_RANGE, endpoint=True))

    canvas = np.zeros((height, width), dtype=np.uint8)
    cv2.polylines(
        canvas, [polyline.reshape(-1, 1, 2)], False, 255, thickness=thickness, lineType=cv2.LINE_8
    )
    return canvas > 0, polyline, thickness


def render_sample(
    seed: np.random.SeedSequence, height: int, width: int, defective: bool
) -> RenderedSample:
    """Generate one image from its own seed."""
    rng = np.random.default_rng(seed)
    background = render_background(rng, height, width)
    image = background.copy()
    if not defective:
        return RenderedSample(
            image=image,
            mask=np.zeros((height, width), dtype=bool),
            background=background,
            polyline=np.zeros((0, 2), dtype=np.int32),
            width=0,
        )
    mask, polyline, thickness = render_crack(rng, height, width)
    contrast = rng.uniform(*CRACK_CONTRAST_RANGE)
    sign = -1.0 if rng.random() < 0.5 else 1.0
    image[mask] = np.clip(image[mask] + sign * contrast, 0.0, 1.0)
    return RenderedSample(
        image=image, mask=mask, background=background, polyline=polyline, width=thickness
    )


def _write_png(array: np.ndarray, path: Path) -> None:
    Image.fromarray(array, mode="L").save(path, format="PNG", optimize=False)


def synth_generate(
    n_pos: int,
    n_neg: int,
    size: Union[int, Tuple[int, int]],
    seed: int,
    out_dir: Union[str, Path],
    images_per_product: int = IMAGES_PER_PRODUCT,
) -> SynthCorpus:
    """Write a synthetic corpus loadable by ``load_dataset``.

    Args:
        n_pos: Number of defective images
        n_neg: Number of non-defective images
        size: Square side or (height, width), multiples of 64
        seed: Corpus seed; the same seed gives byte-identical files
        out_dir: Target directory (created)
        images_per_product: Images grouped under one product folder

    Returns:
        SynthCorpus describing the written files

    Raises:
        ValidationError: On invalid counts or size
        DataError: If the directory cannot be written
    """
    height, width = _normalize_size(size)
    if n_pos < 0 or n_neg < 0 or n_pos + n_neg == 0:
        raise ValidationError("Need a positive number of images", field="n_pos")
    if images_per_product < 1:
        raise ValidationError("images_per_product must be positive", field="images_per_product")

    root = Path(out_dir)
    sequence = np.random.SeedSequence(seed)
    order_seed, *sample_seeds = sequence.spawn(n_pos + n_neg + 1)
    labels = np.array([True] * n_pos + [False] * n_neg)
    labels = labels[np.random.default_rng(order_seed).permutation(labels.size)]

    records: List[dict] = []
    try:
        root.mkdir(parents=True, exist_ok=True)
        for index, (defective, sample_seed) in enumerate(zip(labels, sample_seeds)):
            product_id = f"prod_{index // images_per_product:03d}"
            product_dir = root / product_id
            product_dir.mkdir(exist_ok=True)
            rendered = render_sample(sample_seed, height, width, bool(defective))
            image_name = f"img_{index:04d}.png"
            mask_name = f"img_{index:04d}{MASK_SUFFIX}.png"
            _write_png(np.round(rendered.image * 255).astype(np.uint8), product_dir / image_name)
            _write_png(rendered.mask.astype(np.uint8) * 255, product_dir / mask_name)
            records.append(
                {
                    "image": f"{product_id}/{image_name}",
                    "mask": f"{product_id}/{mask_name}",
                    "label": int(defective),
                    "product_id": product_id,
                }
            )
        manifest_path = write_manifest(root, records)
    except OSError as e:
        raise DataError(f"Cannot write synthetic corpus to {root}: {e}", path=str(root)) from e

    products = len({r["product_id"] for r in records})
    logger.info(
        "Generated %d defective and %d clean %dx%d images in %d products under %s",
        n_pos,
        n_neg,
        height,
        width,
        products,
        root,
    )
    return SynthCorpus(
        root=root,
        manifest_path=manifest_path,
        n_pos=n_pos,
        n_neg=n_neg,
        products=products,
    )
