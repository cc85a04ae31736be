"""Dataset loading, annotation variants, folds, augmentation and synthetic data."""

from .annotations import (
    ANNOTATIONS,
    apply_annotation,
    box_per_region,
    dilate_mask,
    make_box_annotation,
)
from .folds import FoldPlan, attach_subsample, make_folds, subsample_positives
from .loader import load_dataset, load_pair, read_manifest, write_manifest
from .sample import DEFECTIVE, NON_DEFECTIVE, Sample, split_by_label
from .synth import SynthCorpus, render_sample, synth_generate
from .transforms import block_max, block_mean, downscale, rotate90, rotate90_augment

__all__ = [
    "ANNOTATIONS",
    "DEFECTIVE",
    "NON_DEFECTIVE",
    "FoldPlan",
    "Sample",
    "SynthCorpus",
    "apply_annotation",
    "attach_subsample",
    "block_max",
    "block_mean",
    "box_per_region",
    "dilate_mask",
    "downscale",
    "load_dataset",
    "load_pair",
    "make_box_annotation",
    "make_folds",
    "read_manifest",
    "render_sample",
    "rotate90",
    "rotate90_augment",
    "split_by_label",
    "subsample_positives",
    "synth_generate",
    "write_manifest",
]
