"""Per-fold training runs and their on-disk artifacts.

A fold directory holds::

    model.ksdd               both networks after stage 2
    baseline.yaml            logistic baseline weights
    loss_segmentation.csv
    loss_decision.csv
    checkpoints/             optional per-epoch weight files
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import yaml

from ..common.config import RunConfig, TrainConfig
from ..common.errors import DataError, DefectNetError, MissingFoldModelError
from ..common.logging_utils import RunLogger
from ..dataio.folds import FoldPlan
from ..dataio.sample import Sample
from ..network.model import DefectNet, build_defect_net
from ..network.weights import load_weights, save_weights
from .baseline import LogisticModel, fit_logistic_baseline
from .trainer import LossTrace, prepare_samples, train_decision, train_segmentation

logger = logging.getLogger(__name__)

MODEL_FILENAME = "model.ksdd"
BASELINE_FILENAME = "baseline.yaml"
CHECKPOINT_DIR = "checkpoints"


@dataclass
class FoldResult:
    """Artifacts of one trained fold."""

    fold: int
    fold_dir: Path
    model_path: Path
    baseline_path: Path
    segmentation_trace: LossTrace
    decision_trace: LossTrace


def fold_dir(run_dir: Union[str, Path], config: TrainConfig, fold: int) -> Path:
    return Path(run_dir) / config.key() / f"fold_{fold}"


def fold_seed(seed: int, fold: int) -> int:
    """Independent, reproducible seed of one fold."""
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def save_baseline(model: LogisticModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {
        "weights": [float(w) for w in model.weights],
        "bias": float(model.bias),
        "iterations": int(model.iterations),
        "converged": bool(model.converged),
    }
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False)
    return path


def load_baseline(path: Union[str, Path]) -> LogisticModel:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        return LogisticModel(
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            iterations=int(data.get("iterations", 0)),
            converged=bool(data.get("converged", False)),
        )
    except (OSError, yaml.YAMLError, KeyError, TypeError) as e:
        raise DataError(f"Cannot read baseline {path}: {e}", path=str(path)) from e


def train_fold(
    samples: Sequence[Sample],
    plan: FoldPlan,
    fold: int,
    config: TrainConfig,
    run_dir: Union[str, Path],
    run_logger: Optional[RunLogger] = None,
    model: Optional[DefectNet] = None,
) -> FoldResult:
    """Train both stages on every fold except ``fold`` and write the artifacts.

    Args:
        samples: Raw samples (annotation and resolution are applied here)
        plan: Fold plan, including any positive subsample
        fold: Held-out fold
        config: Training settings
        run_dir: Run output directory
        run_logger: Optional run event log
        model: Untrained model to use instead of the default full-size one
    """
    out_dir = fold_dir(run_dir, config, fold)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_raw, _ = plan.split(samples, fold)
    train_samples = prepare_samples(train_raw, config)
    seed = fold_seed(config.seed, fold)
    fold_config = config.with_overrides(seed=seed)
    context = {"fold": fold, "config": config.key()}
    if run_logger is not None:
        run_logger.log_event("fold_started", train_images=len(train_samples), **context)

    if model is None:
        model = build_defect_net(seed, dtype=np.dtype(config.dtype))

    def checkpoint(stage: str, epoch: int) -> None:
        save_weights(model, out_dir / CHECKPOINT_DIR / f"{stage}_epoch{epoch:03d}.ksdd")

    try:
        _, seg_trace = train_segmentation(
            model.segmentation, train_samples, fold_config, run_logger, checkpoint, context
        )
        seg_trace.to_csv(out_dir / "loss_segmentation.csv")
        model.segmentation.frozen = True
        baseline = fit_logistic_baseline(train_samples, model.segmentation)
        _, dec_trace = train_decision(
            model, train_samples, fold_config, run_logger, checkpoint, context
        )
        dec_trace.to_csv(out_dir / "loss_decision.csv")
    except DefectNetError as e:
        e.details.setdefault("fold", fold)
        raise

    model_path = save_weights(model, out_dir / MODEL_FILENAME)
    baseline_path = save_baseline(baseline, out_dir / BASELINE_FILENAME)
    if run_logger is not None:
        run_logger.log_event("fold_finished", model=str(model_path), **context)
    return FoldResult(fold, out_dir, model_path, baseline_path, seg_trace, dec_trace)


def train_cross_validation(
    samples: Sequence[Sample],
    plan: FoldPlan,
    run_config: RunConfig,
    run_logger: Optional[RunLogger] = None,
    config: Optional[TrainConfig] = None,
    model_factory: Optional[Callable[[int], DefectNet]] = None,
) -> List[FoldResult]:
    """Train every fold, up to ``run_config.jobs`` folds at a time.

    ``model_factory(fold)`` supplies the untrained model of a fold; the
    default full-size network is built otherwise.
    """
    config = config or run_config.train

    def run(fold: int) -> FoldResult:
        model = model_factory(fold) if model_factory is not None else None
        return train_fold(
            samples, plan, fold, config, run_config.output_dir, run_logger, model=model
        )

    folds = range(plan.fold_count)
    if run_config.jobs > 1:
        with ThreadPoolExecutor(max_workers=run_config.jobs) as pool:
            return list(pool.map(run, folds))
    return [run(fold) for fold in folds]


def load_fold_model(
    run_dir: Union[str, Path], config: TrainConfig, fold: int, template: Optional[DefectNet] = None
):
    """Load the trained model and baseline of one fold.

    Raises:
        MissingFoldModelError: If the fold has no model file
    """
    directory = fold_dir(run_dir, config, fold)
    model_path = directory / MODEL_FILENAME
    if not model_path.exists():
        raise MissingFoldModelError(fold, str(model_path))
    model = load_weights(model_path, template)
    model.segmentation.frozen = True
    return model, load_baseline(directory / BASELINE_FILENAME)
