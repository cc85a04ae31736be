"""Two-stage surface-defect detection."""

__version__ = "0.1.0"
