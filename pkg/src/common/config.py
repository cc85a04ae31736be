"""Configuration management for training and evaluation runs.

This module handles loading run configuration from YAML, applying command-line
overrides and writing the resolved configuration into each run directory.
"""

import copy
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from .errors import ConfigurationError

LOSS_TYPES = ("mse", "cross_entropy")
RESOLUTIONS = ("full", "half")
DTYPES = ("float32", "float64")
ANNOTATION_KINDS = (
    "original",
    "dilate5",
    "dilate9",
    "dilate13",
    "dilate17",
    "big",
    "coarse",
)

# SGD learning rates for the segmentation stage, per pixel loss
DEFAULT_SEGMENTATION_LR = {"mse": 0.005, "cross_entropy": 0.1}

SNAPSHOT_FILENAME = "config.yaml"


@dataclass
class TrainConfig:
    """Two-stage training settings.

    Leaving ``lr_segmentation`` unset picks the learning rate that belongs to
    ``loss_type``; ``decision_steps`` defaults to ``steps``.
    """

    loss_type: str = "cross_entropy"
    lr_segmentation: Optional[float] = None
    lr_decision: float = 0.1
    steps: int = 6600
    decision_steps: Optional[int] = None
    batch: int = 1
    rotate: bool = False
    annotation: str = "dilate5"
    resolution: str = "full"
    seed: int = 0
    dtype: str = "float32"
    log_every: int = 100
    checkpoint_every_epochs: int = 0
    segmentation_cache_mb: int = 1024  # frozen segmentation outputs kept for decision training

    def __post_init__(self):
        if self.lr_segmentation is None and self.loss_type in DEFAULT_SEGMENTATION_LR:
            self.lr_segmentation = DEFAULT_SEGMENTATION_LR[self.loss_type]
        if self.decision_steps is None:
            self.decision_steps = self.steps

    def validate(self) -> "TrainConfig":
        """Check every field.

        Returns:
            self, for chaining

        Raises:
            ConfigurationError: If any field is out of range
        """
        if self.loss_type not in LOSS_TYPES:
            raise ConfigurationError(
                f"Unknown loss_type '{self.loss_type}'", field="loss_type", allowed=list(LOSS_TYPES)
            )
        if self.annotation not in ANNOTATION_KINDS:
            raise ConfigurationError(
                f"Unknown annotation '{self.annotation}'",
                field="annotation",
                allowed=list(ANNOTATION_KINDS),
            )
        if self.resolution not in RESOLUTIONS:
            raise ConfigurationError(
                f"Unknown resolution '{self.resolution}'", field="resolution"
            )
        if self.dtype not in DTYPES:
            raise ConfigurationError(f"Unsupported dtype '{self.dtype}'", field="dtype")
        if self.batch != 1:
            raise ConfigurationError("Batch size must be 1", field="batch", value=self.batch)
        for name in ("lr_segmentation", "lr_decision"):
            value = getattr(self, name)
            if value is None or value <= 0:
                raise ConfigurationError(f"{name} must be positive", field=name, value=value)
        if self.steps < 0 or self.decision_steps < 0:
            raise ConfigurationError("Step counts must be non-negative", field="steps")
        if self.log_every < 1:
            raise ConfigurationError("log_every must be at least 1", field="log_every")
        if self.segmentation_cache_mb < 0:
            raise ConfigurationError(
                "segmentation_cache_mb must be non-negative", field="segmentation_cache_mb"
            )
        return self

    def key(self) -> str:
        """Short identifier of the configuration axes, used for run subdirectories."""
        rotation = "rot" if self.rotate else "norot"
        return f"{self.annotation}-{self.loss_type}-{self.resolution}-{rotation}"

    def with_overrides(self, **changes: Any) -> "TrainConfig":
        """Return a copy with fields replaced.

        Changing ``loss_type`` without giving ``lr_segmentation`` re-derives the
        learning rate for the new loss.
        """
        if "loss_type" in changes and "lr_segmentation" not in changes:
            changes["lr_segmentation"] = None
        if "steps" in changes and "decision_steps" not in changes:
            changes["decision_steps"] = None
        return replace(self, **changes)


@dataclass
class DatasetConfig:
    """Dataset location and file-pairing rules."""

    root: str = "./data/synthetic"
    mask_suffix: str = "_label"
    image_suffixes: Tuple[str, ...] = (".png", ".bmp", ".jpg", ".jpeg")
    image_size: Optional[Tuple[int, int]] = None  # (height, width)


@dataclass
class LoggingConfig:
    """Logging configuration settings."""

    application_log_path: Optional[str] = None  # default: <output_dir>/defectnet.log
    log_level: str = "INFO"


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    output_dir: str = "./runs/default"
    subsample_positives: Optional[int] = None
    fold_count: int = 3
    jobs: int = 1

    def validate(self) -> "RunConfig":
        """Validate nested sections and run-level fields."""
        self.train.validate()
        if self.fold_count < 1:
            raise ConfigurationError("fold_count must be at least 1", field="fold_count")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1", field="jobs")
        if self.subsample_positives is not None and self.subsample_positives < 1:
            raise ConfigurationError(
                "subsample_positives must be positive", field="subsample_positives"
            )
        if self.dataset.image_size is not None:
            height, width = self.dataset.image_size
            if height % 64 or width % 64:
                raise ConfigurationError(
                    "dataset.image_size must be divisible by 64",
                    field="dataset.image_size",
                    value=[height, width],
                )
        return self

    def to_dict(self) -> Dict[str, Any]:
        """Plain-data form used for snapshots."""
        data = asdict(self)
        data["dataset"]["image_suffixes"] = list(self.dataset.image_suffixes)
        if self.dataset.image_size is not None:
            data["dataset"]["image_size"] = list(self.dataset.image_size)
        return data

    def save_snapshot(self, run_dir: str) -> Path:
        """Write the resolved configuration into a run directory.

        Args:
            run_dir: Run output directory

        Returns:
            Path of the written snapshot
        """
        path = Path(run_dir) / SNAPSHOT_FILENAME
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)
        return path

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Build a RunConfig from nested plain data.

        Raises:
            ConfigurationError: On unknown keys or invalid values
        """
        data = dict(data or {})
        try:
            dataset_data = dict(data.pop("dataset", {}) or {})
            if "image_suffixes" in dataset_data:
                dataset_data["image_suffixes"] = tuple(dataset_data["image_suffixes"])
            if dataset_data.get("image_size") is not None:
                dataset_data["image_size"] = tuple(int(v) for v in dataset_data["image_size"])
            config = cls(
                dataset=DatasetConfig(**dataset_data),
                train=TrainConfig(**dict(data.pop("train", {}) or {})),
                logging=LoggingConfig(**dict(data.pop("logging", {}) or {})),
                **data,
            )
        except TypeError as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e
        return config.validate()


def _set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    node = data
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"Cannot override '{dotted}'", key=dotted)
    node[parts[-1]] = value


def load_run_config(
    path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Load a run configuration.

    Flag overrides win over values from the file. Keys are dotted paths such as
    ``train.loss_type``; ``None`` values are ignored so unset flags keep the
    file's value.

    Args:
        path: Optional YAML configuration file
        overrides: Dotted-key overrides

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: If the file is missing or invalid
    """
    data: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigurationError(
                f"Configuration file not found: {config_path}", path=str(config_path)
            )
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(
                f"Invalid YAML in configuration: {str(e)}", path=str(config_path)
            ) from e
        if not isinstance(data, dict):
            raise ConfigurationError("Configuration root must be a mapping", path=str(config_path))

    data = copy.deepcopy(data)
    train_section = data.get("train") or {}
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        if dotted == "train.loss_type" and (overrides or {}).get("train.lr_segmentation") is None:
            # a new loss brings its own learning rate unless one was given explicitly
            if train_section.get("loss_type") != value:
                train_section.pop("lr_segmentation", None)
        _set_dotted(data, dotted, value)
        train_section = data.get("train") or {}
    return RunConfig.from_dict(data)
