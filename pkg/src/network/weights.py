"""Versioned little-endian weight-file format.

Layout::

    magic   4 bytes  b"KSDD"
    version u32
    count   u32
    count x record:
        name_len u16, name utf-8
        dtype    u8   (1 = float32, 2 = float64)
        ndim     u8, dims u32 * ndim
        data     raw little-endian values

Records cover every learnable tensor and the running normalization
statistics, so a loaded network reproduces the saved one bit for bit.
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from ..common.errors import (
    BadMagicError,
    ErrorCode,
    ShapeError,
    TruncatedFileError,
    VersionMismatchError,
    WeightFileError,
)
from .model import DecisionNet, DefectNet, SegmentationNet, build_defect_net

logger = logging.getLogger(__name__)

MAGIC = b"KSDD"
FORMAT_VERSION = 1

_DTYPE_TAGS = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}
_TAG_DTYPES = {tag: dtype.newbyteorder("<") for dtype, tag in _DTYPE_TAGS.items()}

Network = Union[DefectNet, SegmentationNet, DecisionNet]


def _named_tensors(net: Network) -> Dict[str, np.ndarray]:
    return net.named_tensors()


def encode_tensors(tensors: Dict[str, np.ndarray]) -> bytes:
    """Serialize named tensors into the weight-file byte layout."""
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, value in tensors.items():
        dtype = np.dtype(value.dtype)
        if dtype not in _DTYPE_TAGS:
            raise ShapeError(f"Unsupported dtype {dtype} for tensor {name}", tensor=name)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", _DTYPE_TAGS[dtype], value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype=dtype.newbyteorder("<")).tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise TruncatedFileError(self.path, len(self.data))
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_tensors(data: bytes, path: str = "<bytes>") -> Dict[str, np.ndarray]:
    """Parse weight-file bytes into named tensors.

    Raises:
        BadMagicError: If the magic bytes are wrong
        VersionMismatchError: If the format version is not supported
        TruncatedFileError: If the data ends before the last record does
        WeightFileError: On an unknown dtype tag or a tensor name that is not UTF-8
    """
    reader = _Reader(data, path)
    magic = data[:4]
    if len(magic) < 4:
        raise TruncatedFileError(path, len(data))
    if magic != MAGIC:
        raise BadMagicError(path, magic)
    reader.offset = 4
    version, count = reader.unpack("<II")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(path, version, FORMAT_VERSION)

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name_offset = reader.offset
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise WeightFileError(
                ErrorCode.WEIGHT_FILE_CORRUPT,
                f"{path}: tensor name at offset {name_offset} is not valid UTF-8",
                {"path": path, "offset": name_offset},
            ) from e
        tag, ndim = reader.unpack("<BB")
        if tag not in _TAG_DTYPES:
            raise WeightFileError(
                ErrorCode.WEIGHT_FILE_CORRUPT,
                f"{path}: unknown dtype tag {tag} for tensor {name}",
                {"path": path, "tensor": name},
            )
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        dtype = _TAG_DTYPES[tag]
        size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        raw = reader.take(size)
        values = np.frombuffer(raw, dtype=dtype).reshape(shape)
        tensors[name] = values.astype(dtype.newbyteorder("="))
    if reader.offset != len(data):
        logger.warning("%s has %d trailing bytes", path, len(data) - reader.offset)
    return tensors


def save_weights(net: Network, path: Union[str, Path]) -> Path:
    """Write all parameters and running statistics of ``net`` to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = _named_tensors(net)
    tmp_path = path.with_name(path.name + ".tmp")
    tmp_path.write_bytes(encode_tensors(tensors))
    tmp_path.replace(path)
    logger.info("Saved %d tensors to %s", len(tensors), path)
    return path


def assign_tensors(net: Network, tensors: Dict[str, np.ndarray], path: str = "<bytes>") -> Network:
    """Copy named tensors into ``net`` in place, checking names and shapes."""
    targets = _named_tensors(net)
    missing = sorted(set(targets) - set(tensors))
    unexpected = sorted(set(tensors) - set(targets))
    if missing or unexpected:
        raise ShapeError(
            f"{path} does not match the network layout",
            missing=missing[:10],
            unexpected=unexpected[:10],
        )
    for name, target in targets.items():
        value = tensors[name]
        if value.shape != target.shape:
            raise ShapeError(
                f"{path}: tensor {name} has shape {value.shape}, network expects {target.shape}",
                tensor=name,
            )
        if value.dtype != target.dtype:
            raise ShapeError(
                f"{path}: tensor {name} is {value.dtype}, network is {target.dtype}", tensor=name
            )
        target[...] = value
    return net


def load_weights(path: Union[str, Path], template: Optional[Network] = None) -> Network:
    """Load a weight file.

    Args:
        path: File written by ``save_weights``
        template: Network to fill in place; a default-layout ``DefectNet`` in
            the file's precision is built when omitted

    Returns:
        The filled network

    Raises:
        WeightFileError: If the file cannot be read or is malformed
        ShapeError: If the file does not match the template layout
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise WeightFileError(
            ErrorCode.WEIGHT_FILE_CORRUPT,
            f"Cannot read weight file {path}: {e}",
            {"path": str(path)},
        ) from e
    tensors = decode_tensors(data, str(path))
    if template is None:
        dtypes = {value.dtype for value in tensors.values()}
        dtype = dtypes.pop() if len(dtypes) == 1 else np.dtype(np.float64)
        template = build_defect_net(0, dtype=dtype)
    assign_tensors(template, tensors, str(path))
    logger.info("Loaded %d tensors from %s", len(tensors), path)
    return template
