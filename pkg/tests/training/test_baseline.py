"""Tests for the logistic-regression baseline."""

import numpy as np
import pytest

from src.common.errors import ValidationError
from src.evaluation.metrics import ScoredSet, average_precision
from src.training.baseline import (
    descriptors_for,
    fit_logistic,
    fit_logistic_baseline,
    segmentation_descriptor,
)


@pytest.mark.unit
class TestFitLogistic:
    """Tests for fit_logistic."""

    def test_separable_data(self):
        """Test fitting two separable classes."""
        descriptors = np.array([[0.0, 0.1], [0.5, 0.0], [3.0, 1.0], [4.0, 1.2]])
        labels = [0, 0, 1, 1]
        model = fit_logistic(descriptors, labels, max_iterations=2000)
        predictions = model.predict_proba(descriptors) > 0.5
        np.testing.assert_array_equal(predictions, [False, False, True, True])

    def test_converges_on_overlapping_classes(self, rng):
        """Test that fitting converges on overlapping classes."""
        negatives = rng.normal(0.0, 1.0, size=(50, 2))
        positives = rng.normal(1.5, 1.0, size=(50, 2))
        model = fit_logistic(np.vstack([negatives, positives]), [0] * 50 + [1] * 50)
        assert model.converged
        assert np.all(model.weights > 0)

    def test_weights_act_on_raw_descriptors(self):
        """Test that the fitted weights apply to unscaled descriptors."""
        descriptors = np.array([[10.0, 100.0], [12.0, 100.0], [20.0, 100.0], [22.0, 100.0]])
        model = fit_logistic(descriptors, [0, 0, 1, 1], max_iterations=500)
        assert model.decision_function(np.array([[11.0, 100.0]]))[0] < 0
        assert model.decision_function(np.array([[21.0, 100.0]]))[0] > 0

    def test_single_class(self):
        """Test fitting labels of one class only."""
        with pytest.raises(ValidationError):
            fit_logistic(np.zeros((3, 2)), [1, 1, 1])

    def test_shape_mismatch(self):
        """Test descriptors and labels of different lengths."""
        with pytest.raises(ValidationError):
            fit_logistic(np.zeros((3, 2)), [0, 1])


@pytest.mark.unit
class TestDescriptors:
    """Tests for the segmentation descriptor."""

    def test_max_and_mean(self):
        """Test the maximum and mean of a segmentation map."""
        seg_map = np.array([[[1.0, -3.0], [2.0, 4.0]]])
        np.testing.assert_allclose(segmentation_descriptor(seg_map), [4.0, 1.0])

    def test_matrix_shape(self, tiny_model, make_sample):
        """Test the descriptor matrix shape."""
        samples = [make_sample(str(i), i % 2 == 0, seed=i) for i in range(4)]
        net = tiny_model().segmentation
        assert descriptors_for(samples, net).shape == (4, 2)
        assert descriptors_for([], net).shape == (0, 2)

    def test_baseline_on_network(self, tiny_model, make_sample):
        """Test fitting the baseline on network outputs."""
        samples = [make_sample(str(i), i % 2 == 0, seed=i) for i in range(4)]
        model = fit_logistic_baseline(samples, tiny_model().segmentation)
        assert model.weights.shape == (2,)


@pytest.mark.unit
class TestShuffledLabels:
    """The baseline carries no signal once labels are independent of descriptors."""

    def test_ap_near_prevalence(self):
        """Test that held-out AP with shuffled labels lands near the positive rate."""
        generator = np.random.default_rng(17)
        labels = generator.random(2000) < 0.3
        descriptors = generator.normal(0.0, 1.0, size=(2000, 2)) + 2.0 * labels[:, None]
        shuffled = generator.permutation(labels)
        model = fit_logistic(descriptors[:1000], shuffled[:1000])
        scored = ScoredSet.from_arrays(model.predict_proba(descriptors[1000:]), shuffled[1000:])
        prevalence = shuffled[1000:].mean()
        assert average_precision(scored) == pytest.approx(prevalence, abs=0.06)
