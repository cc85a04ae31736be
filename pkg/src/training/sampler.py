"""Balanced alternating sample stream and epoch bookkeeping."""

import logging
from dataclasses import dataclass
from typing import Generic, Iterator, List, Sequence, TypeVar

import numpy as np

from ..common.errors import ValidationError

logger = logging.getLogger(__name__)

T = TypeVar("T")


class _ClassCycle(Generic[T]):
    """Endless draws from one class, reshuffled at the start of every cycle."""

    def __init__(self, items: Sequence[T], rng: np.random.Generator):
        self.items = list(items)
        self.rng = rng
        self.order: List[int] = []
        self.position = 0
        self.cycles = 0

    def next(self) -> T:
        if self.position == len(self.order):
            self.order = list(self.rng.permutation(len(self.items)))
            self.position = 0
            self.cycles += 1
        item = self.items[self.order[self.position]]
        self.position += 1
        return item


class BalancedSampler(Generic[T]):
    """Defective sample on every even step, non-defective on every odd step.

    Each class is drawn without replacement until it is exhausted, then
    reshuffled, so every defective sample is seen once per ``2 * P`` steps.
    """

    def __init__(self, positives: Sequence[T], negatives: Sequence[T], seed: int):
        if not positives or not negatives:
            raise ValidationError(
                "Balanced sampling needs both defective and non-defective samples",
                field="samples",
                positives=len(positives),
                negatives=len(negatives),
            )
        pos_seed, neg_seed = np.random.SeedSequence(seed).spawn(2)
        self._positives = _ClassCycle(positives, np.random.default_rng(pos_seed))
        self._negatives = _ClassCycle(negatives, np.random.default_rng(neg_seed))
        self.step = 0

    def __iter__(self) -> Iterator[T]:
        return self

    def __next__(self) -> T:
        source = self._positives if self.step % 2 == 0 else self._negatives
        self.step += 1
        return source.next()


def balanced_sampler(positives: Sequence[T], negatives: Sequence[T], seed: int) -> Iterator[T]:
    """Infinite D, N, D, N, ... stream (see ``BalancedSampler``)."""
    return BalancedSampler(positives, negatives, seed)


@dataclass(frozen=True)
class EpochAccounting:
    """Epochs in the defective-sample sense: every positive seen once per ``2 * P`` steps."""

    positives: int
    steps: int

    def __post_init__(self):
        if self.positives < 1:
            raise ValidationError("Epoch accounting needs at least one positive", field="positives")

    @property
    def steps_per_epoch(self) -> int:
        return 2 * self.positives

    @property
    def epochs(self) -> float:
        return self.steps / self.steps_per_epoch

    @property
    def complete_epochs(self) -> int:
        return self.steps // self.steps_per_epoch

    def is_epoch_end(self, step: int) -> bool:
        """True when 0-based ``step`` is the last step of an epoch."""
        return (step + 1) % self.steps_per_epoch == 0

    def to_dict(self) -> dict:
        return {"positives": self.positives, "steps": self.steps, "epochs": self.epochs}
