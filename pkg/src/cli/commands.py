"""Subcommand implementations.

Every command takes the parsed arguments, returns None on success and lets
package errors propagate; ``main`` turns them into exit codes.
"""

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import yaml
from PIL import Image

from ..common.config import RunConfig, load_run_config
from ..common.errors import DataError
from ..common.logging_utils import RunLogger, setup_application_logging
from ..dataio.folds import FOLD_PLAN_FILENAME, FoldPlan, attach_subsample, make_folds
from ..dataio.loader import load_dataset, read_grayscale
from ..dataio.synth import synth_generate
from ..evaluation.bench import bench_forward
from ..evaluation.cv import ConfigGrid, decision_contribution, evaluate_cv, setting_impacts
from ..evaluation.report import write_cv_results
from ..network.model import (
    build_defect_net,
    count_parameters,
    probability_map,
    receptive_field,
)
from ..network.weights import load_weights
from ..training.pipeline import load_fold_model, train_cross_validation

logger = logging.getLogger(__name__)

LOG_FILENAME = "defectnet.log"
DEFAULT_BENCH_SIZES = ((1408, 512), (704, 256))


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    image_size = get("image_size")
    return {
        "output_dir": get("out"),
        "jobs": get("jobs"),
        "subsample_positives": get("subsample_positives"),
        "dataset.root": get("dataset"),
        "dataset.image_size": list(image_size) if image_size else None,
        "train.seed": get("seed"),
        "train.loss_type": get("loss"),
        "train.lr_segmentation": get("lr_segmentation"),
        "train.lr_decision": get("lr_decision"),
        "train.steps": get("steps"),
        "train.decision_steps": get("decision_steps"),
        "train.annotation": get("annotation"),
        "train.resolution": get("resolution"),
        "train.rotate": get("rotate"),
        "train.dtype": get("dtype"),
        "logging.log_level": get("log_level"),
    }


def load_config(args: argparse.Namespace) -> RunConfig:
    """Run configuration from --config plus flag overrides, with logging set up."""
    config = load_run_config(args.config, _overrides(args))
    log_path = config.logging.application_log_path or str(Path(config.output_dir) / LOG_FILENAME)
    setup_application_logging(log_path, config.logging.log_level)
    return config


def _fold_plan(config: RunConfig, samples, run_dir: Path) -> FoldPlan:
    plan_path = run_dir / FOLD_PLAN_FILENAME
    if plan_path.exists():
        plan = FoldPlan.load(plan_path)
        logger.info("Using existing fold plan %s", plan_path)
    else:
        plan = make_folds(samples, config.train.seed, config.fold_count)
    return plan


def _load_samples(config: RunConfig):
    samples = load_dataset(config.dataset.root, config.dataset, jobs=config.jobs)
    if not samples:
        raise DataError(f"No samples found under {config.dataset.root}", path=config.dataset.root)
    return samples


def cmd_synth(args: argparse.Namespace) -> None:
    setup_application_logging(None, args.log_level or "INFO")
    out_dir = args.out or "./data/synthetic"
    corpus = synth_generate(
        args.pos, args.neg, args.size, args.seed if args.seed is not None else 0, out_dir
    )
    print(corpus.manifest_path)


def cmd_train(args: argparse.Namespace) -> None:
    config = load_config(args)
    run_dir = Path(config.output_dir)
    samples = _load_samples(config)
    plan = _fold_plan(config, samples, run_dir)
    attach_subsample(plan, samples, config.subsample_positives, config.train.seed)
    plan.save(run_dir / FOLD_PLAN_FILENAME)
    config.save_snapshot(run_dir)

    with RunLogger(run_dir) as run_logger:
        run_logger.log_event(
            "run_started",
            command="train",
            config=config.train.key(),
            samples=len(samples),
            folds=plan.fold_count,
            subsample_positives=config.subsample_positives,
        )
        results = train_cross_validation(samples, plan, config, run_logger)
    for result in results:
        print(f"fold {result.fold}: {result.model_path}")


def cmd_eval(args: argparse.Namespace) -> None:
    config = load_config(args)
    run_dir = Path(config.output_dir)
    samples = _load_samples(config)
    plan = _fold_plan(config, samples, run_dir)
    configs = ConfigGrid(base=config.train).configs() if args.grid else [config.train]

    def provider(train_config, fold):
        return load_fold_model(run_dir, train_config, fold)

    table = evaluate_cv(samples, plan, configs, provider, jobs=config.jobs)
    impacts = setting_impacts(table)
    contribution = decision_contribution(table.ap_by_key("decision"), table.ap_by_key("baseline"))
    report_dir = Path(args.report_dir) if args.report_dir else run_dir / "eval"
    summary = write_cv_results(table, report_dir, impacts, contribution)

    with RunLogger(run_dir) as run_logger:
        run_logger.log_event(
            "evaluation_written", summary=str(summary), configurations=len(table)
        )
    for row in table.rows:
        fold_aps = ", ".join(
            "n/a" if ap is None else f"{ap:.4f}" for ap in row.decision.fold_aps.values()
        )
        baseline = f" baseline AP {row.baseline.ap:.4f}" if row.baseline else ""
        print(
            f"{row.key}: AP {row.decision.ap:.4f} (folds: {fold_aps}){baseline} "
            f"FP {row.decision.fp} FN {row.decision.fn} "
            f"FP@full-recall {row.decision.fp_at_zero_miss}"
        )
    print(summary)


def cmd_bench(args: argparse.Namespace) -> None:
    setup_application_logging(None, args.log_level or "INFO")
    if args.weights:
        model = load_weights(args.weights)
    else:
        seed = args.seed if args.seed is not None else 0
        model = build_defect_net(seed, dtype=np.dtype(args.dtype))
    sizes = args.size or list(DEFAULT_BENCH_SIZES)
    results = [bench_forward(model, h, w, args.repeats, args.warmup) for h, w in sizes]

    print(f"parameters: {count_parameters(model)}")
    print(f"receptive field (segmentation): {receptive_field(model.segmentation)} px")
    for result in results:
        print(
            f"{result.height}x{result.width}: median {result.median_ms:.1f} ms "
            f"(IQR {result.spread_ms:.1f} ms, {result.repeats} runs), {result.macs} MACs"
        )
    ratio: Optional[float] = None
    if len(results) >= 2 and results[1].median_ms > 0:
        ratio = results[0].median_ms / results[1].median_ms
        print(
            f"time ratio {ratio:.2f}, MAC ratio {results[0].macs / results[1].macs:.2f}"
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.yaml", "w", encoding="utf-8") as f:
            yaml.safe_dump(
                {
                    "parameters": count_parameters(model),
                    "receptive_field": receptive_field(model.segmentation),
                    "results": [r.to_dict() for r in results],
                    "time_ratio": ratio,
                },
                f,
                sort_keys=False,
            )


def cmd_infer(args: argparse.Namespace) -> None:
    setup_application_logging(None, args.log_level or "WARNING")
    model = load_weights(args.weights)
    pixels = read_grayscale(args.image)
    if args.image_size:
        height, width = args.image_size
        pixels = np.asarray(Image.fromarray(pixels).resize((width, height), Image.BILINEAR))
    image = (pixels.astype(np.float64) / 255.0).astype(model.segmentation.dtype)
    score, seg_map = model.score(image)
    print(f"{score:.6f}")
    if args.prob_map:
        probability = probability_map(seg_map)[0]
        pixels = np.round(np.clip(probability, 0.0, 1.0) * 255).astype(np.uint8)
        path = Path(args.prob_map)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(pixels, mode="L").save(path)
        logger.info("Probability map written to %s", path)
