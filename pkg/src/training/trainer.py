"""Two-stage training: segmentation first, then the decision network on a frozen backbone."""

import csv
import hashlib
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..common.config import TrainConfig
from ..common.errors import NumericError, PreconditionFailedError
from ..common.logging_utils import RunLogger
from ..dataio.annotations import apply_annotation
from ..dataio.sample import Sample, split_by_label
from ..dataio.transforms import downscale, rotate90_augment
from ..network.model import DefectNet, SegmentationNet
from ..tensor_core import sgd_step
from .losses import image_loss, pixel_loss, segmentation_target
from .sampler import BalancedSampler, EpochAccounting

logger = logging.getLogger(__name__)

CheckpointCallback = Callable[[str, int], None]
CacheKey = Tuple[str, bool]


@dataclass
class LossTrace:
    """Per-step losses of one training stage."""

    stage: str
    accounting: Optional[EpochAccounting] = None
    steps: List[int] = field(default_factory=list)
    losses: List[float] = field(default_factory=list)

    def append(self, step: int, loss: float) -> None:
        self.steps.append(step)
        self.losses.append(loss)

    def windowed_mean(self, window: int) -> np.ndarray:
        """Means of consecutive non-overlapping windows of ``window`` losses."""
        values = np.asarray(self.losses, dtype=np.float64)
        usable = (values.size // window) * window
        if usable == 0:
            return values[:0]
        return values[:usable].reshape(-1, window).mean(axis=1)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write ``step,loss`` rows; the header comment carries the epoch accounting."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            if self.accounting is not None:
                acc = self.accounting
                f.write(
                    f"# stage={self.stage} positives={acc.positives} steps={acc.steps} "
                    f"epochs={acc.epochs:g}\n"
                )
            writer = csv.writer(f)
            writer.writerow(["step", "loss"])
            for step, loss in zip(self.steps, self.losses):
                writer.writerow([step, repr(loss)])
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], stage: str = "") -> "LossTrace":
        trace = cls(stage=stage)
        with open(path, "r", encoding="utf-8") as f:
            rows = csv.reader(line for line in f if not line.startswith("#"))
            next(rows, None)
            for step, loss in rows:
                trace.append(int(step), float(loss))
        return trace


class SegmentationCache:
    """Frozen segmentation outputs, least recently used first out, under a byte budget.

    Entries larger than the whole budget are never stored; a budget of 0
    disables caching.
    """

    def __init__(self, max_bytes: int):
        self.max_bytes = max_bytes
        self.nbytes = 0
        self._entries: "OrderedDict[CacheKey, Tuple[np.ndarray, np.ndarray]]" = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: CacheKey) -> bool:
        return key in self._entries

    def get(self, key: CacheKey) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        entry = self._entries.get(key)
        if entry is not None:
            self._entries.move_to_end(key)
        return entry

    def put(self, key: CacheKey, features: np.ndarray, seg_map: np.ndarray) -> None:
        size = features.nbytes + seg_map.nbytes
        if size > self.max_bytes or key in self._entries:
            return
        self._entries[key] = (features, seg_map)
        self.nbytes += size
        while self.nbytes > self.max_bytes:
            _, (old_features, old_map) = self._entries.popitem(last=False)
            self.nbytes -= old_features.nbytes + old_map.nbytes


def prepare_samples(samples: Sequence[Sample], config: TrainConfig) -> List[Sample]:
    """Apply the annotation variant at original resolution, then the resolution setting."""
    dtype = np.dtype(config.dtype)
    prepared = []
    for sample in samples:
        sample = apply_annotation(sample, config.annotation)
        if config.resolution == "half":
            sample = downscale(sample, 2)
        prepared.append(sample.with_arrays(image=sample.image.astype(dtype, copy=False)))
    return prepared


def _stage_seeds(seed: int) -> Dict[str, np.random.SeedSequence]:
    seg_sampler, seg_aug, dec_sampler, dec_aug = np.random.SeedSequence(seed).spawn(4)
    return {
        "segmentation_sampler": seg_sampler,
        "segmentation_augment": seg_aug,
        "decision_sampler": dec_sampler,
        "decision_augment": dec_aug,
    }


def _sampler(samples: Sequence[Sample], seed: np.random.SeedSequence) -> BalancedSampler:
    positives, negatives = split_by_label(samples)
    return BalancedSampler(positives, negatives, int(seed.generate_state(1)[0]))


def _checkpoint_due(config: TrainConfig, accounting: EpochAccounting, step: int) -> bool:
    if config.checkpoint_every_epochs <= 0 or not accounting.is_epoch_end(step):
        return False
    epoch = (step + 1) // accounting.steps_per_epoch
    return epoch % config.checkpoint_every_epochs == 0


def train_segmentation(
    net: SegmentationNet,
    train_samples: Sequence[Sample],
    config: TrainConfig,
    run_logger: Optional[RunLogger] = None,
    on_checkpoint: Optional[CheckpointCallback] = None,
    context: Optional[Dict] = None,
) -> Tuple[SegmentationNet, LossTrace]:
    """Train the segmentation network alone with the configured pixel loss.

    Each step draws one image from the balanced sampler, optionally rotates
    it, and applies plain SGD with ``config.lr_segmentation``.

    Args:
        net: Segmentation network (must not be frozen)
        train_samples: Prepared samples (annotation and resolution applied)
        config: Training settings
        run_logger: Optional run event log
        on_checkpoint: Called as ``on_checkpoint("segmentation", epoch)``
        context: Extra fields for log events (e.g. the fold index)

    Returns:
        (the trained network, its loss trace)

    Raises:
        PreconditionFailedError: If the network is frozen
        NumericError: If the loss becomes non-finite, naming the step
    """
    if net.frozen:
        raise PreconditionFailedError("Cannot train a frozen segmentation network")
    context = context or {}
    seeds = _stage_seeds(config.seed)
    sampler = _sampler(train_samples, seeds["segmentation_sampler"])
    augment_rng = np.random.default_rng(seeds["segmentation_augment"])
    positives, _ = split_by_label(train_samples)
    accounting = EpochAccounting(positives=len(positives), steps=config.steps)
    trace = LossTrace(stage="segmentation", accounting=accounting)
    logger.info(
        "Segmentation training: %d steps (%g epochs), loss=%s, lr=%s",
        config.steps,
        accounting.epochs,
        config.loss_type,
        config.lr_segmentation,
    )

    for step in range(config.steps):
        sample = next(sampler)
        if config.rotate:
            sample = rotate90_augment(sample, 0.5, augment_rng)
        _, seg_map = net.forward(sample.image, "train")
        loss, grad = pixel_loss(seg_map, segmentation_target(sample.mask), config.loss_type)
        if not np.isfinite(loss):
            raise NumericError(
                f"Non-finite segmentation loss at step {step}", step=step, stage="segmentation"
            )
        net.backward(grad)
        sgd_step([net.param_group()], config.lr_segmentation)
        trace.append(step, loss)

        if (step + 1) % config.log_every == 0:
            recent = float(np.mean(trace.losses[-config.log_every :]))
            logger.info("segmentation step %d/%d loss %.6f", step + 1, config.steps, recent)
        if _checkpoint_due(config, accounting, step):
            epoch = (step + 1) // accounting.steps_per_epoch
            if on_checkpoint is not None:
                on_checkpoint("segmentation", epoch)
            if run_logger is not None:
                run_logger.log_event(
                    "checkpoint_saved", stage="segmentation", epoch=epoch, **context
                )

    net.clear_cache()
    if run_logger is not None:
        run_logger.log_event(
            "stage_finished",
            stage="segmentation",
            steps=config.steps,
            epochs=accounting.epochs,
            final_loss=trace.losses[-1] if trace.losses else None,
            **context,
        )
    return net, trace


def train_decision(
    model: DefectNet,
    train_samples: Sequence[Sample],
    config: TrainConfig,
    run_logger: Optional[RunLogger] = None,
    on_checkpoint: Optional[CheckpointCallback] = None,
    context: Optional[Dict] = None,
) -> Tuple[DefectNet, LossTrace]:
    """Train the decision network with image-level sigmoid cross-entropy.

    The segmentation network must already be frozen; it runs in inference
    mode, so its parameters and running statistics stay untouched. Its outputs
    are deterministic and are cached per image and orientation, up to
    ``config.segmentation_cache_mb``.

    Raises:
        PreconditionFailedError: If the segmentation network is not frozen
        NumericError: If the loss becomes non-finite, naming the step
    """
    if not model.segmentation.frozen:
        raise PreconditionFailedError(
            "Decision training needs a frozen segmentation network", stage="decision"
        )
    context = context or {}
    steps = config.decision_steps
    seeds = _stage_seeds(config.seed)
    sampler = _sampler(train_samples, seeds["decision_sampler"])
    augment_rng = np.random.default_rng(seeds["decision_augment"])
    positives, _ = split_by_label(train_samples)
    accounting = EpochAccounting(positives=len(positives), steps=steps)
    trace = LossTrace(stage="decision", accounting=accounting)
    cache = SegmentationCache(config.segmentation_cache_mb * 1024 * 1024)
    logger.info("Decision training: %d steps, lr=%s", steps, config.lr_decision)

    for step in range(steps):
        original = next(sampler)
        sample = rotate90_augment(original, 0.5, augment_rng) if config.rotate else original
        key = (sample.image_id, sample is not original)
        cached = cache.get(key)
        if cached is not None:
            features, seg_map = cached
        else:
            features, seg_map = model.segmentation.forward(sample.image, "infer")
            cache.put(key, features, seg_map)

        _, logit = model.decision.forward(features, seg_map, "train")
        loss, d_logit = image_loss(logit, sample.target)
        if not np.isfinite(loss):
            raise NumericError(
                f"Non-finite decision loss at step {step}", step=step, stage="decision"
            )
        model.decision.backward(d_logit)
        # the frozen segmentation group is passed along and skipped by the optimizer
        sgd_step(
            [model.decision.param_group(), model.segmentation.param_group()], config.lr_decision
        )
        trace.append(step, loss)

        if (step + 1) % config.log_every == 0:
            recent = float(np.mean(trace.losses[-config.log_every :]))
            logger.info("decision step %d/%d loss %.6f", step + 1, steps, recent)
        if _checkpoint_due(config, accounting, step):
            epoch = (step + 1) // accounting.steps_per_epoch
            if on_checkpoint is not None:
                on_checkpoint("decision", epoch)
            if run_logger is not None:
                run_logger.log_event("checkpoint_saved", stage="decision", epoch=epoch, **context)

    model.decision.clear_cache()
    logger.debug("Segmentation cache held %d entries, %d bytes", len(cache), cache.nbytes)
    if run_logger is not None:
        run_logger.log_event(
            "stage_finished",
            stage="decision",
            steps=steps,
            epochs=accounting.epochs,
            final_loss=trace.losses[-1] if trace.losses else None,
            **context,
        )
    return model, trace


def parameter_digest(net) -> str:
    """SHA-256 over every named tensor (parameters and running statistics)."""
    digest = hashlib.sha256()
    for name, value in sorted(net.named_tensors().items()):
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(value).tobytes())
    return digest.hexdigest()
