"""Grouped cross-validation over the configuration grid.

Each configuration is scored on every held-out fold by the decision network
and by the logistic baseline; scores are pooled across folds before the
metrics are computed, and per-fold APs are kept alongside.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..common.config import ANNOTATION_KINDS, LOSS_TYPES, RESOLUTIONS, TrainConfig
from ..dataio.folds import FoldPlan
from ..dataio.sample import Sample
from ..network.model import DefectNet
from ..training.baseline import LogisticModel, segmentation_descriptor
from ..training.trainer import prepare_samples
from .metrics import EvalReport, ScoredImage, ScoredSet, evaluate_scores

logger = logging.getLogger(__name__)

ModelProvider = Callable[[TrainConfig, int], Tuple[DefectNet, Optional[LogisticModel]]]

DEFAULT_GRID_ANNOTATIONS = ANNOTATION_KINDS[:5]


@dataclass
class ConfigGrid:
    """Cartesian product of the four configuration axes over a base config."""

    base: TrainConfig = field(default_factory=TrainConfig)
    annotations: Sequence[str] = DEFAULT_GRID_ANNOTATIONS
    losses: Sequence[str] = LOSS_TYPES
    resolutions: Sequence[str] = RESOLUTIONS
    rotations: Sequence[bool] = (False, True)

    def configs(self) -> List[TrainConfig]:
        return [
            self.base.with_overrides(
                annotation=annotation, loss_type=loss, resolution=resolution, rotate=rotate
            )
            for annotation, loss, resolution, rotate in itertools.product(
                self.annotations, self.losses, self.resolutions, self.rotations
            )
        ]

    def __len__(self) -> int:
        return (
            len(self.annotations) * len(self.losses) * len(self.resolutions) * len(self.rotations)
        )


@dataclass
class CVRow:
    """Pooled results of one configuration."""

    config: TrainConfig
    decision: EvalReport
    baseline: Optional[EvalReport] = None

    @property
    def key(self) -> str:
        return self.config.key()


@dataclass
class CVTable:
    rows: List[CVRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def ap_by_key(self, head: str = "decision") -> Dict[str, float]:
        result = {}
        for row in self.rows:
            report = getattr(row, head)
            if report is not None:
                result[row.key] = report.ap
        return result


def score_fold(
    model: DefectNet,
    baseline: Optional[LogisticModel],
    samples: Sequence[Sample],
    fold: Optional[int] = None,
) -> Tuple[ScoredSet, Optional[ScoredSet]]:
    """Decision and baseline scores of prepared held-out samples (one forward pass each)."""
    decision = ScoredSet()
    baseline_set = ScoredSet() if baseline is not None else None
    for sample in samples:
        score, seg_map = model.score(sample.image)
        decision.add(ScoredImage(sample.image_id, score, sample.defective, fold))
        if baseline_set is not None:
            probability = float(baseline.predict_proba(segmentation_descriptor(seg_map)[None])[0])
            baseline_set.add(ScoredImage(sample.image_id, probability, sample.defective, fold))
    return decision, baseline_set


def evaluate_config(
    samples: Sequence[Sample],
    plan: FoldPlan,
    config: TrainConfig,
    model_provider: ModelProvider,
) -> CVRow:
    """Pool the held-out scores of every fold for one configuration.

    Raises:
        MissingFoldModelError: From ``model_provider`` when a fold has no model
    """
    decision, baseline_pooled = ScoredSet(), ScoredSet()
    has_baseline = True
    for fold in range(plan.fold_count):
        model, baseline = model_provider(config, fold)
        _, held_out = plan.split(samples, fold)
        prepared = prepare_samples(held_out, config)
        fold_decision, fold_baseline = score_fold(model, baseline, prepared, fold)
        decision.extend(fold_decision)
        if fold_baseline is None:
            has_baseline = False
        else:
            baseline_pooled.extend(fold_baseline)

    row = CVRow(
        config=config,
        decision=evaluate_scores(decision, f"{config.key()}/decision"),
        baseline=evaluate_scores(baseline_pooled, f"{config.key()}/baseline")
        if has_baseline
        else None,
    )
    logger.info(
        "%s: AP %.4f (baseline %s), FP %d FN %d at best F, FP at full recall %d",
        row.key,
        row.decision.ap,
        f"{row.baseline.ap:.4f}" if row.baseline else "n/a",
        row.decision.fp,
        row.decision.fn,
        row.decision.fp_at_zero_miss,
    )
    return row


def evaluate_cv(
    dataset: Sequence[Sample],
    fold_plan: FoldPlan,
    config_grid: Union[ConfigGrid, Sequence[TrainConfig]],
    model_provider: ModelProvider,
    jobs: int = 1,
) -> CVTable:
    """Evaluate every configuration of ``config_grid``; one table row each."""
    configs = config_grid.configs() if isinstance(config_grid, ConfigGrid) else list(config_grid)

    def run(config: TrainConfig) -> CVRow:
        return evaluate_config(dataset, fold_plan, config, model_provider)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, configs))
    else:
        rows = [run(config) for config in configs]
    return CVTable(rows)


# Axis name -> (field, from value, to value) for single-setting switches.
IMPACT_AXES = {
    "loss": ("loss_type", "mse", "cross_entropy"),
    "resolution": ("resolution", "half", "full"),
    "rotation": ("rotate", False, True),
}


@dataclass
class SettingImpact:
    """Average metric change caused by switching one setting."""

    axis: str
    from_value: object
    to_value: object
    mean_change: float
    std_positive: float
    std_negative: float
    pairs: int

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "from": self.from_value,
            "to": self.to_value,
            "mean_change": self.mean_change,
            "std_positive": self.std_positive,
            "std_negative": self.std_negative,
            "pairs": self.pairs,
        }


def _axes_values(config: TrainConfig) -> Dict[str, object]:
    return {
        "annotation": config.annotation,
        "loss_type": config.loss_type,
        "resolution": config.resolution,
        "rotate": config.rotate,
    }


def setting_impacts(table: CVTable, head: str = "decision") -> List[SettingImpact]:
    """Average AP change per axis over every pair of rows differing only on that axis.

    Standard deviations are given separately for the positive and the
    negative changes.
    """
    reports = {}
    for row in table.rows:
        report = getattr(row, head)
        if report is not None:
            reports[tuple(sorted(_axes_values(row.config).items()))] = report.ap

    impacts = []
    for axis, (name, source, target) in IMPACT_AXES.items():
        changes = []
        for key, ap in reports.items():
            values = dict(key)
            if values[name] != source:
                continue
            values[name] = target
            other = reports.get(tuple(sorted(values.items())))
            if other is not None:
                changes.append(other - ap)
        if not changes:
            continue
        changes = np.asarray(changes)
        positive, negative = changes[changes > 0], changes[changes < 0]
        impacts.append(
            SettingImpact(
                axis=axis,
                from_value=source,
                to_value=target,
                mean_change=float(changes.mean()),
                std_positive=float(positive.std()) if positive.size else 0.0,
                std_negative=float(negative.std()) if negative.size else 0.0,
                pairs=int(changes.size),
            )
        )
    return impacts


@dataclass
class DecisionContribution:
    gains: Dict[str, float]
    mean_gain: float

    def to_dict(self) -> dict:
        return {"gains": dict(self.gains), "mean_gain": self.mean_gain}


def _as_ap(value: Union[float, EvalReport]) -> float:
    return value.ap if isinstance(value, EvalReport) else float(value)


def decision_contribution(
    table_decision: Mapping[str, Union[float, EvalReport]],
    table_baseline: Mapping[str, Union[float, EvalReport]],
) -> DecisionContribution:
    """AP gain of the decision network over the logistic baseline, per configuration key."""
    gains = {
        key: _as_ap(table_decision[key]) - _as_ap(table_baseline[key])
        for key in table_decision
        if key in table_baseline
    }
    mean_gain = float(np.mean(list(gains.values()))) if gains else 0.0
    return DecisionContribution(gains=gains, mean_gain=mean_gain)
