"""Product-grouped cross-validation folds and positive subsampling."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..common.errors import DataError, ValidationError
from .sample import Sample, split_by_label

logger = logging.getLogger(__name__)

DEFAULT_FOLD_COUNT = 3
FOLD_PLAN_FILENAME = "folds.json"


@dataclass
class FoldPlan:
    """Assignment of every product to one cross-validation fold."""

    fold_count: int
    assignment: Dict[str, int]
    seed: int = 0
    subsample: Dict[int, List[str]] = field(default_factory=dict)

    def fold_of(self, sample: Sample) -> int:
        try:
            return self.assignment[sample.product_id]
        except KeyError as e:
            raise DataError(
                f"Product {sample.product_id} is not in the fold plan",
                product_id=sample.product_id,
            ) from e

    def split(self, samples: Sequence[Sample], fold: int) -> Tuple[List[Sample], List[Sample]]:
        """(train, held_out) for ``fold``; the training part honours ``subsample``."""
        if not 0 <= fold < self.fold_count:
            raise ValidationError(f"Fold {fold} out of range", field="fold")
        held_out = [s for s in samples if self.fold_of(s) == fold]
        train = [s for s in samples if self.fold_of(s) != fold]
        keep = self.subsample.get(fold)
        if keep is not None:
            kept = set(keep)
            train = [s for s in train if not s.defective or s.image_id in kept]
        return train, held_out

    def folds(self, samples: Sequence[Sample]) -> List[List[Sample]]:
        """Samples of each fold, in input order."""
        groups: List[List[Sample]] = [[] for _ in range(self.fold_count)]
        for sample in samples:
            groups[self.fold_of(sample)].append(sample)
        return groups

    def to_dict(self) -> Dict:
        return {
            "fold_count": self.fold_count,
            "seed": self.seed,
            "assignment": dict(sorted(self.assignment.items())),
            "subsample": {str(k): list(v) for k, v in sorted(self.subsample.items())},
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "FoldPlan":
        return cls(
            fold_count=int(data["fold_count"]),
            assignment={str(k): int(v) for k, v in data["assignment"].items()},
            seed=int(data.get("seed", 0)),
            subsample={int(k): list(v) for k, v in (data.get("subsample") or {}).items()},
        )

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        if path.is_dir():
            path = path / FOLD_PLAN_FILENAME
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "FoldPlan":
        path = Path(path)
        if path.is_dir():
            path = path / FOLD_PLAN_FILENAME
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (OSError, ValueError, KeyError) as e:
            raise DataError(f"Cannot read fold plan {path}: {e}", path=str(path)) from e


def make_folds(
    samples: Sequence[Sample], seed: int, fold_count: int = DEFAULT_FOLD_COUNT
) -> FoldPlan:
    """Assign products to folds, keeping every product inside one fold.

    Products with at least one defective image are shuffled and dealt
    round-robin first, so per-fold defective-product counts differ by at most
    one; the remaining products continue the same deal.

    Raises:
        DataError: If there are fewer products than folds
    """
    products: Dict[str, bool] = {}
    for sample in samples:
        products[sample.product_id] = products.get(sample.product_id, False) or sample.defective
    if len(products) < fold_count:
        raise DataError(
            f"Need at least {fold_count} products for {fold_count}-fold cross-validation, "
            f"found {len(products)}",
            products=len(products),
        )

    rng = np.random.default_rng(seed)
    defective = sorted(p for p, has_defect in products.items() if has_defect)
    clean = sorted(p for p, has_defect in products.items() if not has_defect)
    order = [defective[i] for i in rng.permutation(len(defective))]
    order += [clean[i] for i in rng.permutation(len(clean))]

    assignment = {product: index % fold_count for index, product in enumerate(order)}
    plan = FoldPlan(fold_count=fold_count, assignment=assignment, seed=seed)
    logger.info(
        "Fold plan (seed %d): %s images per fold",
        seed,
        [len(group) for group in plan.folds(samples)],
    )
    return plan


def subsample_positives(train_set: Sequence[Sample], count: int, seed: int) -> List[Sample]:
    """Keep ``count`` defective samples (chosen by ``seed``) and every non-defective one.

    The choice depends only on the set of defective image ids and the seed, so
    repeated calls remove the same samples whatever the input order.

    Raises:
        ValidationError: If ``count`` exceeds the available positives
    """
    positives, _ = split_by_label(train_set)
    if count < 0 or count > len(positives):
        raise ValidationError(
            f"Cannot keep {count} positives, {len(positives)} available",
            field="subsample_positives",
        )
    ids = sorted(s.image_id for s in positives)
    rng = np.random.default_rng(seed)
    kept = {ids[i] for i in rng.permutation(len(ids))[:count]}
    return [s for s in train_set if not s.defective or s.image_id in kept]


def attach_subsample(
    plan: FoldPlan, samples: Sequence[Sample], count: Optional[int], seed: int
) -> FoldPlan:
    """Record a per-fold positive subsample in ``plan``.

    A ``count`` of None clears any subsample a reused plan still carries.
    """
    plan.subsample = {}
    if count is None:
        return plan
    for fold in range(plan.fold_count):
        train, _ = plan.split(samples, fold)
        reduced = subsample_positives(train, count, seed + fold)
        plan.subsample[fold] = sorted(s.image_id for s in reduced if s.defective)
    return plan
