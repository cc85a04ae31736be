"""Dataset loading and the corpus manifest.

Datasets are laid out one folder per physical product::

    root/
      kos01/
        Part0.jpg
        Part0_label.bmp
        ...

Every image file is paired with the mask whose stem is the image stem plus
``mask_suffix``. Masks are thresholded at > 0.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..common.config import DatasetConfig
from ..common.errors import (
    DataError,
    DimensionMismatchError,
    MissingMaskError,
    UnreadableFileError,
)
from .sample import Sample

logger = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.jsonl"


def read_grayscale(path: Union[str, Path]) -> np.ndarray:
    """Decode an image file into an 8-bit H x W array.

    Raises:
        UnreadableFileError: If the file is missing or cannot be decoded
    """
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("L"), dtype=np.uint8).copy()
    except (OSError, UnidentifiedImageError, ValueError) as e:
        raise UnreadableFileError(str(path), str(e)) from e


def _resize(array: np.ndarray, size: Tuple[int, int], resample) -> np.ndarray:
    height, width = size
    img = Image.fromarray(array)
    return np.asarray(img.resize((width, height), resample=resample))


def _find_mask(image_path: Path, layout: DatasetConfig) -> Path:
    stem = image_path.stem + layout.mask_suffix
    for suffix in (image_path.suffix,) + tuple(layout.image_suffixes):
        for candidate in (suffix, suffix.upper()):
            path = image_path.with_name(stem + candidate)
            if path.exists():
                return path
    raise MissingMaskError(str(image_path), f"{stem}{{{','.join(layout.image_suffixes)}}}")


def _is_image(path: Path, layout: DatasetConfig) -> bool:
    return (
        path.is_file()
        and path.suffix.lower() in layout.image_suffixes
        and not path.stem.endswith(layout.mask_suffix)
    )


def load_pair(
    image_path: Union[str, Path],
    mask_path: Union[str, Path],
    product_id: str,
    image_size: Optional[Tuple[int, int]] = None,
) -> Sample:
    """Load one image/mask pair into a ``Sample``.

    Args:
        image_path: Grayscale image file
        mask_path: Mask file with the same dimensions
        product_id: Product (fold group) identifier
        image_size: Optional (height, width) to resize to; images bilinear,
            masks nearest-neighbour

    Raises:
        UnreadableFileError: If either file cannot be decoded
        DimensionMismatchError: If image and mask sizes differ
    """
    image_path, mask_path = Path(image_path), Path(mask_path)
    image = read_grayscale(image_path)
    mask = read_grayscale(mask_path)
    if image.shape != mask.shape:
        raise DimensionMismatchError(str(image_path), image.shape, mask.shape)
    if image_size is not None and tuple(image.shape) != tuple(image_size):
        image = _resize(image, image_size, Image.BILINEAR)
        mask = _resize(mask, image_size, Image.NEAREST)
    return Sample(
        image=image.astype(np.float64) / 255.0,
        mask=mask > 0,
        product_id=product_id,
        image_id=f"{product_id}/{image_path.stem}",
    )


def discover_pairs(root: Union[str, Path], layout: DatasetConfig) -> List[Tuple[Path, Path, str]]:
    """List (image, mask, product_id) triples in deterministic order."""
    root = Path(root)
    pairs = []
    for product_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for image_path in sorted(p for p in product_dir.iterdir() if _is_image(p, layout)):
            pairs.append((image_path, _find_mask(image_path, layout), product_dir.name))
    return pairs


def load_dataset(
    root: Union[str, Path], layout: Optional[DatasetConfig] = None, jobs: int = 1
) -> List[Sample]:
    """Load every image/mask pair under ``root``.

    Args:
        root: Dataset root with one subfolder per product
        layout: File-pairing rules and optional resize (defaults apply when omitted)
        jobs: Number of loader threads

    Returns:
        Samples sorted by product and file name; an empty list (with a
        warning) for a directory without images

    Raises:
        DataError: If the root does not exist, or per-file errors naming the path
    """
    layout = layout or DatasetConfig(root=str(root))
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"Dataset root {root} is not a directory", path=str(root))

    pairs = discover_pairs(root, layout)
    if not pairs:
        logger.warning("No images found under %s", root)
        return []

    def load(triple):
        return load_pair(*triple, image_size=layout.image_size)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(load, pairs))
    else:
        samples = [load(triple) for triple in pairs]

    positives = sum(1 for s in samples if s.defective)
    products = len({s.product_id for s in samples})
    logger.info(
        "Loaded %d samples (%d defective) from %d products under %s",
        len(samples),
        positives,
        products,
        root,
    )
    return samples


def write_manifest(root: Union[str, Path], records: Iterable[Dict]) -> Path:
    """Write one JSON record per sample (image, mask, label, product_id)."""
    path = Path(root) / MANIFEST_FILENAME
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    return path


def read_manifest(path: Union[str, Path]) -> List[Dict]:
    """Read a manifest written by ``write_manifest``."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILENAME
    if not path.exists():
        raise DataError(f"Manifest not found: {path}", path=str(path))
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataError(
                    f"Invalid manifest record at line {line_number}", path=str(path)
                ) from e
    return records
