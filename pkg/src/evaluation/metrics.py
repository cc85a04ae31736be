"""Image-level detection metrics over scored image sets.

Every threshold rule here classifies an image as defective when
``score >= threshold``. Thresholds are the distinct scores, visited from the
highest down, so tied scores always enter the positive set together.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..common.errors import PreconditionFailedError, ValidationError


@dataclass(frozen=True)
class ScoredImage:
    image_id: str
    score: float
    label: bool
    fold: Optional[int] = None


class ScoredSet:
    """Per-image scores with their ground-truth labels."""

    def __init__(self, items: Iterable[ScoredImage] = ()):
        self.items: List[ScoredImage] = []
        self._ids = set()
        for item in items:
            self.add(item)

    @classmethod
    def from_arrays(
        cls, scores: Sequence[float], labels: Sequence[bool], ids: Optional[Sequence[str]] = None
    ) -> "ScoredSet":
        ids = ids if ids is not None else [f"img_{i}" for i in range(len(scores))]
        return cls(
            ScoredImage(str(i), float(s), bool(l)) for i, s, l in zip(ids, scores, labels)
        )

    def add(self, item: ScoredImage) -> None:
        """Append one image.

        Raises:
            ValidationError: On a non-finite or out-of-range score or a duplicate id
        """
        if not np.isfinite(item.score) or not 0.0 <= item.score <= 1.0:
            raise ValidationError(
                f"Score of {item.image_id} must be finite and in [0, 1], got {item.score}",
                field="score",
            )
        if item.image_id in self._ids:
            raise ValidationError(f"Duplicate image id {item.image_id}", field="image_id")
        self._ids.add(item.image_id)
        self.items.append(item)

    def extend(self, other: "ScoredSet") -> None:
        for item in other.items:
            self.add(item)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def scores(self) -> np.ndarray:
        return np.array([item.score for item in self.items], dtype=np.float64)

    @property
    def labels(self) -> np.ndarray:
        return np.array([item.label for item in self.items], dtype=bool)

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def negatives(self) -> int:
        return len(self) - self.positives


def _require_positive(scored: ScoredSet) -> None:
    if scored.positives == 0:
        raise PreconditionFailedError("Metrics need at least one defective image")


def _threshold_counts(scored: ScoredSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds descending, true positives, false positives) at each threshold."""
    scores, labels = scored.scores, scored.labels
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    tp = np.cumsum(labels)
    fp = np.cumsum(~labels)
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    return scores[ends], tp[ends], fp[ends]


def pr_curve(scored: ScoredSet) -> List[Tuple[float, float]]:
    """(recall, precision) at every distinct score threshold, highest threshold first.

    Raises:
        PreconditionFailedError: If there is no defective image
    """
    _require_positive(scored)
    _, tp, fp = _threshold_counts(scored)
    recall = tp / scored.positives
    precision = tp / (tp + fp)
    return [(float(r), float(p)) for r, p in zip(recall, precision)]


def average_precision(scored: ScoredSet) -> float:
    """Step-integrated area under the PR curve, sum of (R_k - R_{k-1}) * P_k."""
    points = pr_curve(scored)
    ap, previous_recall = 0.0, 0.0
    for recall, precision in points:
        ap += (recall - previous_recall) * precision
        previous_recall = recall
    return float(ap)


@dataclass(frozen=True)
class BestF:
    threshold: float
    fp: int
    fn: int
    f1: float


def best_f_threshold(scored: ScoredSet) -> BestF:
    """Threshold maximising F1; ties go to the higher threshold."""
    _require_positive(scored)
    thresholds, tp, fp = _threshold_counts(scored)
    fn = scored.positives - tp
    f1 = 2 * tp / (2 * tp + fp + fn)
    best = int(np.argmax(f1))  # first maximum is the highest threshold
    return BestF(
        threshold=float(thresholds[best]), fp=int(fp[best]), fn=int(fn[best]), f1=float(f1[best])
    )


def fp_at_full_recall(scored: ScoredSet) -> int:
    """False positives when the threshold is the lowest defective score."""
    _require_positive(scored)
    scores, labels = scored.scores, scored.labels
    threshold = scores[labels].min()
    return int(np.count_nonzero(scores[~labels] >= threshold))


@dataclass
class EvalReport:
    """Metric suite of one scored set."""

    name: str
    ap: float
    best_f_threshold: float
    fp: int
    fn: int
    fp_at_zero_miss: int
    positives: int
    negatives: int
    pr_points: List[Tuple[float, float]]
    records: List[Dict[str, Any]] = field(default_factory=list)
    fold_aps: Dict[int, Optional[float]] = field(default_factory=dict)

    def to_dict(self, include_records: bool = True) -> Dict[str, Any]:
        data = {
            "name": self.name,
            "ap": self.ap,
            "best_f_threshold": self.best_f_threshold,
            "fp": self.fp,
            "fn": self.fn,
            "fp_at_zero_miss": self.fp_at_zero_miss,
            "positives": self.positives,
            "negatives": self.negatives,
            "fold_aps": {int(k): v for k, v in self.fold_aps.items()},
            "pr_points": [[r, p] for r, p in self.pr_points],
        }
        if include_records:
            data["records"] = self.records
        return data


def evaluate_scores(scored: ScoredSet, name: str = "") -> EvalReport:
    """Compute every metric for ``scored``, with per-fold AP where folds are known."""
    best = best_f_threshold(scored)
    fold_aps: Dict[int, Optional[float]] = {}
    folds = sorted({item.fold for item in scored.items if item.fold is not None})
    for fold in folds:
        subset = ScoredSet(item for item in scored.items if item.fold == fold)
        fold_aps[fold] = average_precision(subset) if subset.positives else None
    return EvalReport(
        name=name,
        ap=average_precision(scored),
        best_f_threshold=best.threshold,
        fp=best.fp,
        fn=best.fn,
        fp_at_zero_miss=fp_at_full_recall(scored),
        positives=scored.positives,
        negatives=scored.negatives,
        pr_points=pr_curve(scored),
        records=[
            {
                "image_id": item.image_id,
                "score": item.score,
                "label": int(item.label),
                "predicted": int(item.score >= best.threshold),
                "fold": item.fold,
            }
            for item in scored.items
        ],
        fold_aps=fold_aps,
    )
