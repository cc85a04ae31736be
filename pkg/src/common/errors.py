"""Error codes and exceptions for the defect-detection system.

This module defines all error codes and exception types used throughout
the package, ensuring consistent error handling and reporting. Library code
raises these exceptions; only the command-line front end turns them into
process exit codes.
"""

from enum import IntEnum
from typing import Any, Dict, Optional


class ErrorCode(IntEnum):
    """Standard error codes for invalid input and operational failures."""

    # Caller / data errors (4xxx)
    SHAPE_MISMATCH = 4000
    INVALID_ARGUMENT = 4001
    DATA_ERROR = 4002
    MISSING_MASK = 4003
    UNREADABLE_FILE = 4004
    DIMENSION_MISMATCH = 4005
    EMPTY_MASK = 4006
    PRECONDITION_FAILED = 4007
    MISSING_FOLD_MODEL = 4008

    # Operational errors (5xxx)
    INTERNAL_ERROR = 5000
    CONFIGURATION_ERROR = 5001
    NUMERIC_FAILURE = 5002
    WEIGHT_FILE_BAD_MAGIC = 5003
    WEIGHT_FILE_VERSION = 5004
    WEIGHT_FILE_TRUNCATED = 5005
    WEIGHT_FILE_CORRUPT = 5006


class DefectNetError(Exception):
    """Base exception for all errors raised by this package."""

    exit_code = 1

    def __init__(self, code: ErrorCode, message: str, details: Optional[Dict[str, Any]] = None):
        """Initialize an error.

        Args:
            code: The error code
            message: Human-readable error message
            details: Optional additional context
        """
        self.code = code
        self.message = message
        self.details = details or {}
        super().__init__(f"[{code.name}] {message}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to dictionary format for run logs and reports.

        Returns:
            Dictionary with code, message, and data fields
        """
        return {
            "code": int(self.code),
            "message": self.message,
            "data": {"error_code": self.code.name, "details": self.details},
        }


class ValidationError(DefectNetError):
    """Raised when an argument fails validation."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None, **details):
        """Initialize a validation error.

        Args:
            message: Error message
            field: Optional argument name that failed validation
            **details: Additional context
        """
        if field:
            details["field"] = field
        super().__init__(ErrorCode.INVALID_ARGUMENT, message, details)


class ShapeError(DefectNetError):
    """Raised when tensor shapes do not satisfy an operation's contract."""

    exit_code = 3

    def __init__(self, message: str, **details):
        super().__init__(ErrorCode.SHAPE_MISMATCH, message, details)


class DataError(DefectNetError):
    """Raised when dataset files are missing, unreadable or inconsistent."""

    exit_code = 3

    def __init__(self, message: str, code: ErrorCode = ErrorCode.DATA_ERROR, **details):
        super().__init__(code, message, details)


class MissingMaskError(DataError):
    """Raised when an image has no companion mask file."""

    def __init__(self, image_path: str, expected: str):
        super().__init__(
            f"No mask found for image {image_path} (expected {expected})",
            ErrorCode.MISSING_MASK,
            path=image_path,
            expected=expected,
        )


class UnreadableFileError(DataError):
    """Raised when an image or mask file cannot be decoded."""

    def __init__(self, path: str, reason: str):
        super().__init__(
            f"Cannot read {path}: {reason}", ErrorCode.UNREADABLE_FILE, path=path, reason=reason
        )


class DimensionMismatchError(DataError):
    """Raised when an image and its mask differ in size."""

    def __init__(self, path: str, image_shape: tuple, mask_shape: tuple):
        super().__init__(
            f"Mask size {mask_shape} does not match image size {image_shape} for {path}",
            ErrorCode.DIMENSION_MISMATCH,
            path=path,
            image_shape=list(image_shape),
            mask_shape=list(mask_shape),
        )


class EmptyMaskError(DataError):
    """Raised when an operation needs at least one positive mask pixel."""

    def __init__(self, message: str = "Mask has no positive pixels", **details):
        super().__init__(message, ErrorCode.EMPTY_MASK, **details)


class PreconditionFailedError(DefectNetError):
    """Raised when a required precondition is not met."""

    exit_code = 2

    def __init__(self, message: str, **details):
        super().__init__(ErrorCode.PRECONDITION_FAILED, message, details)


class MissingFoldModelError(DefectNetError):
    """Raised when cross-validation needs a fold model that does not exist."""

    exit_code = 3

    def __init__(self, fold: int, path: Optional[str] = None):
        details: Dict[str, Any] = {"fold": fold}
        if path is not None:
            details["path"] = path
        super().__init__(ErrorCode.MISSING_FOLD_MODEL, f"No trained model for fold {fold}", details)


class ConfigurationError(DefectNetError):
    """Raised when configuration is invalid or missing."""

    exit_code = 2

    def __init__(self, message: str, **details):
        super().__init__(ErrorCode.CONFIGURATION_ERROR, message, details)


class NumericError(DefectNetError):
    """Raised when a computation produces NaN or Inf."""

    exit_code = 4

    def __init__(self, message: str, **details):
        super().__init__(ErrorCode.NUMERIC_FAILURE, message, details)


class WeightFileError(DefectNetError):
    """Base class for weight-file format errors."""

    exit_code = 5


class BadMagicError(WeightFileError):
    """Raised when a weight file does not start with the expected magic bytes."""

    def __init__(self, path: str, found: bytes):
        super().__init__(
            ErrorCode.WEIGHT_FILE_BAD_MAGIC,
            f"{path} is not a weight file (magic {found!r})",
            {"path": path},
        )


class VersionMismatchError(WeightFileError):
    """Raised when a weight file has an unsupported format version."""

    def __init__(self, path: str, found: int, expected: int):
        super().__init__(
            ErrorCode.WEIGHT_FILE_VERSION,
            f"{path} has format version {found}, expected {expected}",
            {"path": path, "found": found, "expected": expected},
        )


class TruncatedFileError(WeightFileError):
    """Raised when a weight file ends before all records are read."""

    def __init__(self, path: str, offset: int):
        super().__init__(
            ErrorCode.WEIGHT_FILE_TRUNCATED,
            f"{path} is truncated at byte {offset}",
            {"path": path, "offset": offset},
        )
