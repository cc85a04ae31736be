"""Command-line interface for training, evaluating and running the defect detector."""

from .main import build_parser, main

__all__ = ["build_parser", "main"]
