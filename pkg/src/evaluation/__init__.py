"""Detection metrics, cross-validation over the configuration grid and benchmarking."""

from .bench import BenchResult, bench_forward
from .cv import (
    ConfigGrid,
    CVRow,
    CVTable,
    DecisionContribution,
    SettingImpact,
    decision_contribution,
    evaluate_config,
    evaluate_cv,
    score_fold,
    setting_impacts,
)
from .metrics import (
    BestF,
    EvalReport,
    ScoredImage,
    ScoredSet,
    average_precision,
    best_f_threshold,
    evaluate_scores,
    fp_at_full_recall,
    pr_curve,
)
from .report import read_reports, write_cv_results, write_pr_curve, write_reports

__all__ = [
    "BenchResult",
    "BestF",
    "CVRow",
    "CVTable",
    "ConfigGrid",
    "DecisionContribution",
    "EvalReport",
    "ScoredImage",
    "ScoredSet",
    "SettingImpact",
    "average_precision",
    "bench_forward",
    "best_f_threshold",
    "decision_contribution",
    "evaluate_config",
    "evaluate_cv",
    "evaluate_scores",
    "fp_at_full_recall",
    "pr_curve",
    "read_reports",
    "score_fold",
    "setting_impacts",
    "write_cv_results",
    "write_pr_curve",
    "write_reports",
]
