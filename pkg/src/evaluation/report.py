"""Writing evaluation results: YAML report documents, a CSV summary and PR-curve CSVs."""

import csv
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Union

import yaml

from .cv import CVTable, DecisionContribution, SettingImpact
from .metrics import EvalReport

logger = logging.getLogger(__name__)

REPORTS_FILENAME = "reports.yaml"
SUMMARY_FILENAME = "summary.csv"
PR_DIR = "pr_curves"

SUMMARY_COLUMNS = [
    "config",
    "annotation",
    "loss",
    "resolution",
    "rotate",
    "head",
    "ap",
    "best_f_threshold",
    "fp",
    "fn",
    "fp_at_zero_miss",
    "positives",
    "negatives",
    "fold_aps",
]


def write_pr_curve(report: EvalReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["recall", "precision"])
        writer.writerows(report.pr_points)
    return path


def write_reports(
    reports: Iterable[EvalReport], out_dir: Union[str, Path], include_records: bool = True
) -> Path:
    """One YAML document per report."""
    path = Path(out_dir) / REPORTS_FILENAME
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump_all(
            (report.to_dict(include_records) for report in reports), f, sort_keys=False
        )
    return path


def read_reports(path: Union[str, Path]) -> List[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [doc for doc in yaml.safe_load_all(f) if doc is not None]


def write_cv_results(
    table: CVTable,
    out_dir: Union[str, Path],
    impacts: Optional[List[SettingImpact]] = None,
    contribution: Optional[DecisionContribution] = None,
    pr_curves: bool = True,
) -> Path:
    """Write reports.yaml, summary.csv and optional PR curves and analysis.

    Returns:
        Path of the summary CSV
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: List[EvalReport] = []
    summary_path = out_dir / SUMMARY_FILENAME
    with open(summary_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in table.rows:
            for head in ("decision", "baseline"):
                report: Optional[EvalReport] = getattr(row, head)
                if report is None:
                    continue
                reports.append(report)
                writer.writerow(
                    {
                        "config": row.key,
                        "annotation": row.config.annotation,
                        "loss": row.config.loss_type,
                        "resolution": row.config.resolution,
                        "rotate": row.config.rotate,
                        "head": head,
                        "ap": f"{report.ap:.6f}",
                        "best_f_threshold": f"{report.best_f_threshold:.6f}",
                        "fp": report.fp,
                        "fn": report.fn,
                        "fp_at_zero_miss": report.fp_at_zero_miss,
                        "positives": report.positives,
                        "negatives": report.negatives,
                        "fold_aps": ";".join(
                            "" if ap is None else f"{ap:.6f}" for ap in report.fold_aps.values()
                        ),
                    }
                )
                if pr_curves:
                    write_pr_curve(report, out_dir / PR_DIR / f"{row.key}_{head}.csv")

    write_reports(reports, out_dir)
    if impacts is not None or contribution is not None:
        analysis = {
            "setting_impacts": [impact.to_dict() for impact in impacts or []],
            "decision_contribution": contribution.to_dict() if contribution else None,
        }
        with open(out_dir / "analysis.yaml", "w", encoding="utf-8") as f:
            yaml.safe_dump(analysis, f, sort_keys=False)
    logger.info("Wrote %d reports to %s", len(reports), out_dir)
    return summary_path
