#!/usr/bin/env python3
"""
Plot precision-recall curves written by ``defectnet eval``.

Reads ``<report dir>/pr_curves/*.csv`` and writes one PNG per configuration,
with the decision-net and baseline curves on the same axes.
"""

import argparse
import csv
import logging
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger("plot_pr_curves")

HEAD_STYLES = {
    "decision": {"color": "#3498db", "label": "Decision network"},
    "baseline": {"color": "#e74c3c", "label": "Logistic baseline", "linestyle": "--"},
}


def read_curve(path: Path):
    """Return (recall, precision) lists from one PR CSV."""
    recall, precision = [], []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            recall.append(float(row["recall"]))
            precision.append(float(row["precision"]))
    return recall, precision


def group_curves(pr_dir: Path):
    """Map configuration key to {head: csv path}."""
    groups = defaultdict(dict)
    for path in sorted(pr_dir.glob("*.csv")):
        key, _, head = path.stem.rpartition("_")
        if head not in HEAD_STYLES:
            logger.warning("Skipping %s: unknown head '%s'", path.name, head)
            continue
        groups[key][head] = path
    return groups


def plot_configuration(key: str, heads: dict, out_dir: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    for head, path in heads.items():
        recall, precision = read_curve(path)
        ax.step(recall, precision, where="post", **HEAD_STYLES[head])
    ax.set_xlim(0.0, 1.02)
    ax.set_ylim(0.0, 1.02)
    ax.set_xlabel("Recall", fontsize=12)
    ax.set_ylabel("Precision", fontsize=12)
    ax.set_title(key, fontsize=11, fontweight="bold")
    ax.grid(alpha=0.3)
    ax.legend(loc="lower left")

    output_path = out_dir / f"{key}.png"
    fig.tight_layout()
    fig.savefig(output_path, dpi=150, facecolor="white")
    plt.close(fig)
    return output_path


def main() -> int:
    parser = argparse.ArgumentParser(description="Plot PR curves from an evaluation directory")
    parser.add_argument("report_dir", help="Directory written by 'defectnet eval'")
    parser.add_argument(
        "--out", default=None, help="Output directory (default: <report dir>/plots)"
    )
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")

    report_dir = Path(args.report_dir)
    pr_dir = report_dir / "pr_curves"
    if not pr_dir.is_dir():
        logger.error("No pr_curves directory under %s", report_dir)
        return 1
    out_dir = Path(args.out) if args.out else report_dir / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)

    groups = group_curves(pr_dir)
    for key, heads in groups.items():
        logger.info("Wrote %s", plot_configuration(key, heads, out_dir))
    logger.info("Plotted %d configurations", len(groups))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
