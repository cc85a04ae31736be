"""Tests for forward-pass benchmarking."""

import pytest

from src.evaluation.bench import bench_forward
from src.network.model import mac_count


@pytest.mark.unit
class TestBenchForward:
    """Tests for bench_forward."""

    def test_result_fields(self, tiny_model):
        """Test the timing and size fields of a benchmark result."""
        model = tiny_model()
        result = bench_forward(model, 64, 128, repeats=3, warmup=1)
        assert (result.height, result.width, result.repeats) == (64, 128, 3)
        assert result.min_ms <= result.median_ms <= result.max_ms
        assert result.spread_ms >= 0.0
        assert result.macs == mac_count(model, 64, 128)

    def test_half_size_costs_a_quarter(self, tiny_model):
        """Test that halving both sides quarters the multiply-accumulates."""
        model = tiny_model()
        full = bench_forward(model, 128, 128, repeats=1, warmup=0)
        half = bench_forward(model, 64, 64, repeats=1, warmup=0)
        assert full.macs == 4 * half.macs

    def test_at_least_one_repeat(self, tiny_model):
        """Test that a zero repeat count still times one pass."""
        assert bench_forward(tiny_model(), 64, 64, repeats=0, warmup=0).repeats == 1

    def test_to_dict(self, tiny_model):
        """Test the dictionary form of a result."""
        data = bench_forward(tiny_model(), 64, 64, repeats=1, warmup=0).to_dict()
        assert set(data) >= {"median_ms", "macs", "height", "width"}
