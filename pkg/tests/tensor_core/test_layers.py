"""Tests for the layer primitives.

Direct-loop oracles check the vectorized forward passes.
"""

import numpy as np
import pytest

from src.common.errors import NumericError, ShapeError, ValidationError
from src.tensor_core import (
    NormState,
    as_tensor,
    check_finite,
    conv2d,
    conv2d_backward,
    feature_norm,
    global_pool,
    global_pool_backward,
    linear,
    maxpool2,
    maxpool2_backward,
    relu,
    relu_backward,
    sigmoid,
)


def direct_conv(input, weights, bias):
    """Quadruple-loop same-padded cross-correlation."""
    channels, height, width = input.shape
    out_channels, _, k, _ = weights.shape
    pad = k // 2
    padded = np.pad(input, ((0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((out_channels, height, width))
    for o in range(out_channels):
        for y in range(height):
            for x in range(width):
                total = bias[o]
                for c in range(channels):
                    for dy in range(k):
                        for dx in range(k):
                            total += weights[o, c, dy, dx] * padded[c, y + dy, x + dx]
                out[o, y, x] = total
    return out


@pytest.mark.unit
class TestConv2d:
    """Tests for conv2d and conv2d_backward."""

    def test_one_by_one_kernel_scales(self):
        """Test that a 1x1 kernel scales its input."""
        out = conv2d(np.ones((1, 3, 3)), np.full((1, 1, 1, 1), 2.0), np.zeros(1))
        assert out.shape == (1, 3, 3)
        assert np.all(out == 2.0)

    def test_zero_weights_give_bias(self, rng):
        """Test that zero weights output the bias."""
        out = conv2d(rng.random((2, 6, 6)), np.zeros((3, 2, 5, 5)), np.array([0.5, -1.0, 2.0]))
        assert np.all(out[0] == 0.5)
        assert np.all(out[1] == -1.0)
        assert np.all(out[2] == 2.0)

    def test_matches_direct_convolution(self, rng):
        """Test agreement with a direct sum over the window."""
        input = rng.standard_normal((2, 5, 5))
        weights = rng.standard_normal((3, 2, 3, 3))
        bias = rng.standard_normal(3)
        np.testing.assert_allclose(
            conv2d(input, weights, bias), direct_conv(input, weights, bias), rtol=0, atol=1e-12
        )

    def test_large_kernel_on_small_map(self, rng):
        """Padding keeps the size even when the kernel exceeds the map."""
        input = rng.standard_normal((2, 4, 3))
        weights = rng.standard_normal((1, 2, 7, 7))
        bias = np.zeros(1)
        np.testing.assert_allclose(
            conv2d(input, weights, bias), direct_conv(input, weights, bias), atol=1e-12
        )

    def test_linear_in_input(self, rng):
        """Test conv(a*x + b*y) == a*conv(x) + b*conv(y) with zero bias."""
        weights = rng.standard_normal((3, 2, 5, 5))
        bias = np.zeros(3)
        x, y = rng.standard_normal((2, 2, 7, 6))
        a, b = 1.7, -0.6
        combined = conv2d(a * x + b * y, weights, bias)
        separate = a * conv2d(x, weights, bias) + b * conv2d(y, weights, bias)
        np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-10)

    def test_channel_mismatch_raises(self):
        """Test weights with the wrong input channels."""
        with pytest.raises(ShapeError):
            conv2d(np.zeros((2, 4, 4)), np.zeros((1, 3, 3, 3)), np.zeros(1))

    def test_even_kernel_raises(self):
        """Test rejecting an even kernel size."""
        with pytest.raises(ShapeError):
            conv2d(np.zeros((1, 4, 4)), np.zeros((1, 1, 2, 2)), np.zeros(1))

    def test_bias_shape_checked(self):
        """Test a bias of the wrong length."""
        with pytest.raises(ShapeError):
            conv2d(np.zeros((1, 4, 4)), np.zeros((2, 1, 3, 3)), np.zeros(3))

    def test_zero_upstream_gives_zero_gradients(self, rng):
        """Test that a zero upstream gradient gives zero gradients."""
        input = rng.standard_normal((2, 6, 6))
        weights = rng.standard_normal((3, 2, 5, 5))
        grad = conv2d_backward(input, weights, np.zeros((3, 6, 6)))
        assert not grad.d_weights.any()
        assert not grad.d_bias.any()
        assert not grad.d_input.any()
        assert grad.d_weights.shape == weights.shape
        assert grad.d_input.shape == input.shape

    def test_input_gradient_skipped_on_request(self, rng):
        """Test skipping the input gradient."""
        grad = conv2d_backward(
            rng.random((1, 4, 4)), rng.random((2, 1, 3, 3)), rng.random((2, 4, 4)), False
        )
        assert grad.d_input is None

    def test_upstream_shape_checked(self, rng):
        """Test an upstream gradient of the wrong shape."""
        with pytest.raises(ShapeError):
            conv2d_backward(rng.random((1, 4, 4)), rng.random((2, 1, 3, 3)), np.zeros((2, 3, 4)))


@pytest.mark.unit
class TestMaxPool:
    """Tests for maxpool2."""

    def test_single_window(self):
        """Test pooling a single 2x2 window."""
        pooled, argmax = maxpool2(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        assert pooled.shape == (1, 1, 1)
        assert pooled[0, 0, 0] == 4.0
        assert argmax[0, 0, 0] == 3  # bottom-right

    def test_constant_input_takes_first_index(self):
        """Test that ties pick the first position."""
        pooled, argmax = maxpool2(np.full((2, 4, 4), 7.0))
        assert np.all(pooled == 7.0)
        assert np.all(argmax == 0)

    def test_matches_window_scan(self, rng):
        """Test agreement with a scan over every window."""
        input = rng.standard_normal((3, 8, 8))
        pooled, _ = maxpool2(input)
        expected = np.zeros((3, 4, 4))
        for c in range(3):
            for y in range(4):
                for x in range(4):
                    expected[c, y, x] = input[c, 2 * y : 2 * y + 2, 2 * x : 2 * x + 2].max()
        np.testing.assert_array_equal(pooled, expected)

    def test_odd_size_raises(self):
        """Test an odd spatial size."""
        with pytest.raises(ShapeError):
            maxpool2(np.zeros((1, 5, 4)))

    def test_backward_routes_to_argmax(self):
        """Test that the gradient goes to the maximum only."""
        input = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        _, argmax = maxpool2(input)
        grad = maxpool2_backward(np.array([[[5.0]]]), argmax)
        np.testing.assert_array_equal(grad, [[[0.0, 0.0], [0.0, 5.0]]])


@pytest.mark.unit
class TestFeatureNorm:
    """Tests for feature_norm."""

    def test_constant_channel_maps_to_zero(self):
        """Test that a constant channel normalizes to zero."""
        out, _ = feature_norm(np.full((1, 3, 3), 4.2), "train", NormState.identity(1))
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_unit_variance_channel_unchanged(self):
        """Test that a zero-mean unit-variance channel is kept."""
        input = np.array([[[-1.0, 1.0], [1.0, -1.0]]])
        out, _ = feature_norm(input, "train", NormState.identity(1))
        np.testing.assert_allclose(out, input, atol=1e-5)

    def test_random_channel_is_standardized(self, rng):
        """Test that each channel ends with mean 0 and variance 1."""
        input = rng.standard_normal((3, 6, 6)) * 4.0 + 2.0
        out, _ = feature_norm(input, "train", NormState.identity(3))
        assert np.all(np.abs(out.mean(axis=(1, 2))) < 1e-10)
        np.testing.assert_allclose(out.var(axis=(1, 2)), 1.0, atol=1e-4)

    def test_running_statistics_follow_momentum(self, rng):
        """Test the running statistics update."""
        input = rng.standard_normal((2, 4, 4)) + 3.0
        state = NormState.identity(2)
        feature_norm(input, "train", state)
        np.testing.assert_allclose(state.running_mean, 0.01 * input.mean(axis=(1, 2)))
        np.testing.assert_allclose(state.running_var, 0.99 + 0.01 * input.var(axis=(1, 2)))

    def test_update_stats_false_keeps_running_statistics(self, rng):
        """Test training statistics without updating them."""
        state = NormState.identity(2)
        feature_norm(rng.standard_normal((2, 4, 4)), "train", state, update_stats=False)
        assert not state.running_mean.any()
        assert np.all(state.running_var == 1.0)

    def test_infer_mode_uses_running_statistics(self, rng):
        """Test that inference uses the running statistics."""
        state = NormState.identity(1)
        state.running_mean[:] = 2.0
        state.running_var[:] = 4.0 - state.epsilon
        input = rng.standard_normal((1, 3, 3))
        out, _ = feature_norm(input, "infer", state)
        np.testing.assert_allclose(out, (input - 2.0) / 2.0)

    def test_single_pixel_train_mode_uses_running_statistics(self):
        """Test that a 1x1 grid is normalized with the running statistics in train mode."""
        state = NormState.identity(2)
        state.running_mean[:] = [1.0, -1.0]
        state.running_var[:] = 4.0 - state.epsilon
        input = np.array([[[3.0]], [[5.0]]])
        out, cache = feature_norm(input, "train", state)
        np.testing.assert_allclose(out[:, 0, 0], [1.0, 3.0])
        np.testing.assert_array_equal(state.running_mean, [1.0, -1.0])
        assert not cache.train

    def test_unknown_mode_rejected(self):
        """Test rejecting an unknown statistics mode."""
        with pytest.raises(ValidationError):
            feature_norm(np.zeros((1, 2, 2)), "eval", NormState.identity(1))


@pytest.mark.unit
class TestActivationsAndPooling:
    """Tests for relu, global_pool, linear and sigmoid."""

    def test_relu(self):
        """Test ReLU on a small vector."""
        np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_relu_all_negative(self):
        """Test ReLU on all negative input."""
        input = -np.ones((2, 3, 3))
        assert not relu(input).any()
        assert not relu_backward(np.ones_like(input), input).any()

    def test_relu_backward_passes_positive_entries(self):
        """Test that ReLU backward only passes positive entries."""
        grad = relu_backward(np.array([1.0, 1.0, 1.0]), np.array([-2.0, 0.0, 3.0]))
        np.testing.assert_array_equal(grad, [0.0, 0.0, 1.0])

    def test_global_pool_constant(self):
        """Test global pooling of a constant map."""
        max_values, mean_values = global_pool(np.full((2, 3, 3), 1.5))
        np.testing.assert_array_equal(max_values, [1.5, 1.5])
        np.testing.assert_array_equal(mean_values, [1.5, 1.5])

    def test_global_pool_ramp(self):
        """Test global pooling of a ramp."""
        max_values, mean_values = global_pool(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        assert max_values[0] == 4.0
        assert mean_values[0] == 2.5

    def test_global_pool_matches_reduction(self, rng):
        """Test agreement with numpy reductions."""
        input = rng.standard_normal((4, 5, 7))
        max_values, mean_values = global_pool(input)
        np.testing.assert_allclose(max_values, input.max(axis=(1, 2)))
        np.testing.assert_allclose(mean_values, input.mean(axis=(1, 2)))

    def test_global_pool_backward(self):
        """Test splitting the gradient between max and mean."""
        input = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        grad = global_pool_backward(np.array([1.0]), np.array([4.0]), input)
        np.testing.assert_array_equal(grad, [[[1.0, 1.0], [1.0, 2.0]]])

    def test_linear_zero_weights_gives_bias(self):
        """Test that zero weights output the bias."""
        assert linear(np.array([1.0, 2.0, 3.0]), np.zeros(3), 0.75) == 0.75

    def test_linear_one_hot_selects(self):
        """Test that a one-hot weight picks one input."""
        assert linear(np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 0.0]), 0.0) == 2.0

    def test_linear_matches_sum(self, rng):
        """Test agreement with an explicit sum."""
        x, w = rng.standard_normal(66), rng.standard_normal(66)
        assert linear(x, w, 0.3) == pytest.approx(sum(a * b for a, b in zip(x, w)) + 0.3)

    def test_linear_length_mismatch(self):
        """Test inputs and weights of different lengths."""
        with pytest.raises(ShapeError):
            linear(np.zeros(3), np.zeros(4), 0.0)

    def test_sigmoid_is_stable(self):
        """Test the sigmoid on large inputs."""
        values = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        assert np.all(np.isfinite(values))
        np.testing.assert_allclose(values, [0.0, 0.5, 1.0])


@pytest.mark.unit
class TestTensorHelpers:
    """Tests for as_tensor and check_finite."""

    def test_as_tensor_is_contiguous(self):
        """Test that tensors come back C-contiguous."""
        tensor = as_tensor(np.arange(12.0).reshape(3, 4).T, dtype=np.float32)
        assert tensor.flags["C_CONTIGUOUS"]
        assert tensor.dtype == np.float32

    def test_check_finite_passes_through(self):
        """Test that finite values pass through."""
        values = np.ones(3)
        assert check_finite(values) is values

    def test_check_finite_raises(self):
        """Test that NaN and infinity are reported."""
        with pytest.raises(NumericError) as exc_info:
            check_finite(np.array([1.0, np.nan, np.inf]), "grad")
        assert exc_info.value.details["count"] == 2
