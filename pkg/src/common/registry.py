"""Registry pattern for pluggable pixel losses and annotation builders.

This module provides a registry mechanism for looking up interchangeable
implementations by their configuration name, so the training and data
pipelines select a loss or an annotation variant from a config string.
"""

import logging
from typing import Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


class Registry:
    """Generic name -> implementation registry."""

    def __init__(self, name: str):
        """Initialize the registry.

        Args:
            name: Registry name for logging
        """
        self.name = name
        self._registry: Dict[str, Callable] = {}

    def register(self, key: str, item: Callable) -> None:
        """Register an implementation.

        Args:
            key: Unique identifier for this implementation
            item: Callable to register
        """
        if key in self._registry:
            logger.warning("%s: Overwriting existing registration for '%s'", self.name, key)

        self._registry[key] = item
        logger.debug("%s: Registered '%s' -> %s", self.name, key, getattr(item, "__name__", item))

    def get(self, key: str) -> Optional[Callable]:
        """Get a registered implementation or None."""
        return self._registry.get(key)

    def get_or_raise(self, key: str) -> Callable:
        """Get a registered implementation or raise an error.

        Args:
            key: Identifier to look up

        Returns:
            Registered implementation

        Raises:
            ValueError: If key not found
        """
        item = self._registry.get(key)
        if item is None:
            raise ValueError(
                f"{self.name}: No registration found for '{key}'. "
                f"Available: {list(self._registry.keys())}"
            )
        return item

    def list_keys(self) -> List[str]:
        """List all registered keys."""
        return list(self._registry.keys())

    def is_registered(self, key: str) -> bool:
        """Check if a key is registered."""
        return key in self._registry


class LossRegistry(Registry):
    """Registry of pixel losses keyed by ``loss_type``."""

    def __init__(self):
        super().__init__("LossRegistry")

    def register_loss(self, loss_type: str, loss_fn: Callable) -> None:
        """Register a loss ``(logits, target) -> (loss, grad)``."""
        self.register(loss_type, loss_fn)

    def get_loss(self, loss_type: str) -> Callable:
        """Get a loss function by type.

        Raises:
            ValueError: If loss type not found
        """
        return self.get_or_raise(loss_type)


class AnnotationRegistry(Registry):
    """Registry of mask builders keyed by annotation kind."""

    def __init__(self):
        super().__init__("AnnotationRegistry")

    def register_annotation(self, kind: str, builder: Callable) -> None:
        """Register a builder ``mask -> mask``."""
        self.register(kind, builder)

    def get_annotation(self, kind: str) -> Callable:
        """Get a mask builder by kind.

        Raises:
            ValueError: If the kind is not registered
        """
        return self.get_or_raise(kind)
