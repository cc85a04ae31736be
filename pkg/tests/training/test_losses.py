"""Tests for the pixel losses and the image-level loss."""

import math

import numpy as np
import pytest

from src.common.errors import ShapeError
from src.tensor_core import numerical_gradient
from src.training.losses import (
    cross_entropy_loss,
    image_loss,
    mse_loss,
    pixel_loss,
    segmentation_target,
)


@pytest.mark.unit
class TestPixelLosses:
    """Tests for mse_loss, cross_entropy_loss and pixel_loss."""

    def test_mse_at_target_is_zero(self, rng):
        """Test that the squared error at the target is zero."""
        target = (rng.random((1, 4, 4)) < 0.5).astype(np.float64)
        loss, grad = mse_loss(target.copy(), target)
        assert loss == 0.0
        assert not grad.any()

    def test_cross_entropy_of_zero_logit(self):
        """Test cross entropy of a zero logit."""
        loss, grad = cross_entropy_loss(np.zeros((1, 2, 2)), np.ones((1, 2, 2)))
        assert loss == pytest.approx(math.log(2.0))
        np.testing.assert_allclose(grad, -0.5 / 4)

    def test_cross_entropy_is_stable(self):
        """Test cross entropy on large logits."""
        loss, _ = cross_entropy_loss(np.array([[[1000.0, -1000.0]]]), np.array([[[1.0, 0.0]]]))
        assert loss == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.gradcheck
    @pytest.mark.parametrize("trial", range(100))
    @pytest.mark.parametrize("loss_type", ["mse", "cross_entropy"])
    def test_gradient_matches_finite_differences(self, loss_type, trial):
        """Test the analytic loss gradient on random maps and targets."""
        generator = np.random.default_rng(3000 + trial)
        height, width = (int(v) for v in generator.integers(1, 7, size=2))
        logits = generator.standard_normal((1, height, width)) * 3.0
        target = (generator.random((1, height, width)) < 0.3).astype(np.float64)
        _, grad = pixel_loss(logits, target, loss_type)
        numeric = numerical_gradient(lambda: pixel_loss(logits, target, loss_type)[0], logits)
        np.testing.assert_allclose(grad, numeric, atol=1e-8)

    def test_two_dimensional_target_accepted(self):
        """Test a target without a channel axis."""
        loss, _ = pixel_loss(np.zeros((1, 2, 3)), np.zeros((2, 3)), "mse")
        assert loss == 0.0

    def test_shape_mismatch(self):
        """Test a map and target of different shapes."""
        with pytest.raises(ShapeError):
            pixel_loss(np.zeros((1, 2, 3)), np.zeros((1, 3, 2)), "mse")

    def test_unknown_loss(self):
        """Test rejecting an unknown loss name."""
        with pytest.raises(ValueError):
            pixel_loss(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)), "hinge")


@pytest.mark.unit
class TestTargets:
    """Tests for segmentation_target and image_loss."""

    def test_segmentation_target_resolution(self):
        """Test reducing a mask to map resolution."""
        mask = np.zeros((64, 32), dtype=bool)
        mask[9, 17] = True
        target = segmentation_target(mask)
        assert target.shape == (1, 8, 4)
        assert target.sum() == 1.0
        assert target[0, 1, 2] == 1.0

    def test_image_loss(self):
        """Test the image loss of a zero logit."""
        loss, d_logit = image_loss(0.0, 1.0)
        assert loss == pytest.approx(math.log(2.0))
        assert d_logit == pytest.approx(-0.5)

    def test_image_loss_derivative(self):
        """Test the image loss derivative against finite differences."""
        logit, eps = 0.7, 1e-6
        numeric = (image_loss(logit + eps, 0.0)[0] - image_loss(logit - eps, 0.0)[0]) / (2 * eps)
        assert image_loss(logit, 0.0)[1] == pytest.approx(numeric, rel=1e-6)
