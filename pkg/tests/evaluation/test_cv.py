"""Tests for grid cross-validation, setting impacts and the report files."""

import csv

import numpy as np
import pytest
import yaml

from src.common.config import TrainConfig
from src.common.errors import MissingFoldModelError
from src.dataio.folds import make_folds
from src.evaluation.cv import (
    ConfigGrid,
    CVRow,
    CVTable,
    decision_contribution,
    evaluate_cv,
    score_fold,
    setting_impacts,
)
from src.evaluation.metrics import EvalReport
from src.evaluation.report import PR_DIR, SUMMARY_FILENAME, read_reports, write_cv_results
from src.training.baseline import LogisticModel


class BrightestPixelModel:
    """Scores an image by whether it holds a near-white pixel."""

    def score(self, image):
        score = 1.0 if image.max() > 0.9 else 0.0
        return score, np.full((1, 8, 8), score)


class MeanIntensityModel:
    def score(self, image):
        return float(np.clip(image.mean(), 0.0, 1.0)), np.zeros((1, 1, 1))


@pytest.fixture
def corpus(make_sample):
    samples = []
    for product in range(6):
        product_id = f"p{product}"
        samples.append(make_sample(f"{product_id}/d", True, product_id=product_id, seed=product))
        samples.append(
            make_sample(f"{product_id}/n", False, product_id=product_id, seed=20 + product)
        )
    return samples


def _report(ap):
    return EvalReport("r", ap, 0.5, 0, 0, 0, 1, 1, [(1.0, ap)])


@pytest.mark.unit
class TestConfigGrid:
    """Tests for ConfigGrid."""

    def test_forty_configurations(self):
        """Test that the grid holds forty distinct configurations."""
        grid = ConfigGrid()
        configs = grid.configs()
        assert len(grid) == len(configs) == 40
        assert len({c.key() for c in configs}) == 40

    def test_learning_rate_follows_loss(self):
        """Test that each loss gets its own learning rate."""
        for config in ConfigGrid().configs():
            expected = 0.005 if config.loss_type == "mse" else 0.1
            assert config.lr_segmentation == expected


@pytest.mark.unit
class TestEvaluateCv:
    """Tests for evaluate_cv and score_fold."""

    def test_perfect_scores(self, corpus):
        """Test a model that separates every fold perfectly."""
        plan = make_folds(corpus, seed=0)
        baseline = LogisticModel(np.array([10.0, 0.0]), -5.0)

        def provider(config, fold):
            return BrightestPixelModel(), baseline

        table = evaluate_cv(corpus, plan, [TrainConfig(annotation="original")], provider)
        (row,) = table.rows
        assert row.decision.ap == 1.0
        assert row.decision.fp_at_zero_miss == 0
        assert row.baseline.ap == 1.0
        assert set(row.decision.fold_aps) == {0, 1, 2}
        assert len(row.decision.records) == len(corpus)

    def test_grid_rows(self, corpus):
        """Test evaluating the whole grid with parallel jobs."""
        plan = make_folds(corpus, seed=0)
        table = evaluate_cv(
            corpus, plan, ConfigGrid(), lambda config, fold: (MeanIntensityModel(), None), jobs=2
        )
        assert len(table) == 40
        assert all(row.baseline is None for row in table.rows)
        assert all(0.0 <= ap <= 1.0 for ap in table.ap_by_key().values())
        assert table.ap_by_key("baseline") == {}

    def test_order_invariant(self, corpus):
        """Test that the sample order does not change the result."""
        plan = make_folds(corpus, seed=2)
        configs = [TrainConfig(annotation="original")]

        def provider(config, fold):
            return MeanIntensityModel(), None

        forward = evaluate_cv(corpus, plan, configs, provider)
        backward = evaluate_cv(corpus[::-1], plan, configs, provider)
        assert forward.rows[0].decision.ap == backward.rows[0].decision.ap

    def test_missing_fold_model(self, corpus):
        """Test that a missing fold model is raised to the caller."""
        plan = make_folds(corpus, seed=0)

        def provider(config, fold):
            raise MissingFoldModelError(fold)

        with pytest.raises(MissingFoldModelError):
            evaluate_cv(corpus, plan, [TrainConfig()], provider)

    def test_score_fold_with_network(self, tiny_model, make_sample):
        """Test scoring a fold with a network and no baseline."""
        samples = [make_sample("a", True), make_sample("b", False)]
        decision, baseline = score_fold(tiny_model(), None, samples, fold=1)
        assert len(decision) == 2
        assert baseline is None
        assert all(item.fold == 1 for item in decision.items)


@pytest.mark.unit
class TestAnalysis:
    """Tests for setting_impacts and decision_contribution."""

    def test_setting_impacts(self):
        """Test the average gain of each setting."""
        table = CVTable(
            [
                CVRow(TrainConfig(loss_type="mse"), _report(0.8)),
                CVRow(TrainConfig(loss_type="cross_entropy"), _report(0.9)),
                CVRow(TrainConfig(loss_type="cross_entropy", rotate=True), _report(0.85)),
            ]
        )
        impacts = {impact.axis: impact for impact in setting_impacts(table)}
        assert set(impacts) == {"loss", "rotation"}
        assert impacts["loss"].mean_change == pytest.approx(0.1)
        assert impacts["loss"].pairs == 1
        assert impacts["rotation"].mean_change == pytest.approx(-0.05)
        assert impacts["rotation"].std_positive == 0.0

    def test_decision_contribution(self):
        """Test the gain of the decision net over segmentation alone."""
        contribution = decision_contribution({"a": 0.9, "b": 0.8}, {"a": 0.7, "c": 0.1})
        assert contribution.gains == {"a": pytest.approx(0.2)}
        assert contribution.mean_gain == pytest.approx(0.2)

    def test_decision_contribution_accepts_reports(self):
        """Test passing full reports instead of plain scores."""
        contribution = decision_contribution({"a": _report(1.0)}, {"a": _report(0.5)})
        assert contribution.mean_gain == 0.5

    def test_no_overlap(self):
        """Test configurations present on only one side."""
        assert decision_contribution({"a": 1.0}, {"b": 1.0}).mean_gain == 0.0


@pytest.mark.unit
class TestWriteResults:
    """Tests for write_cv_results."""

    def test_files(self, tmp_path):
        """Test writing the summary files."""
        table = CVTable(
            [
                CVRow(TrainConfig(loss_type="mse"), _report(0.8), _report(0.6)),
                CVRow(TrainConfig(), _report(0.9)),
            ]
        )
        summary = write_cv_results(
            table,
            tmp_path,
            impacts=setting_impacts(table),
            contribution=decision_contribution(table.ap_by_key(), table.ap_by_key("baseline")),
        )
        with open(summary, newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        assert summary.name == SUMMARY_FILENAME
        assert [(r["config"], r["head"]) for r in rows] == [
            ("dilate5-mse-full-norot", "decision"),
            ("dilate5-mse-full-norot", "baseline"),
            ("dilate5-cross_entropy-full-norot", "decision"),
        ]
        assert rows[0]["ap"] == "0.800000"
        assert len(read_reports(tmp_path / "reports.yaml")) == 3
        assert len(list((tmp_path / PR_DIR).glob("*.csv"))) == 3
        analysis = yaml.safe_load((tmp_path / "analysis.yaml").read_text(encoding="utf-8"))
        assert analysis["decision_contribution"]["mean_gain"] == pytest.approx(0.2)
