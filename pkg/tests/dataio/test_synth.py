"""Tests for the synthetic corpus generator."""

import numpy as np
import pytest

from src.common.errors import ValidationError
from src.dataio.synth import render_sample, synth_generate


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.unit
class TestSynthGenerate:
    """Tests for synth_generate."""

    def test_same_seed_byte_identical(self, tmp_path):
        """Test that the same seed writes byte-identical files."""
        first = synth_generate(3, 3, 64, seed=11, out_dir=tmp_path / "a")
        second = synth_generate(3, 3, 64, seed=11, out_dir=tmp_path / "b")
        assert _files(first.root) == _files(second.root)

    def test_different_seed_differs(self, tmp_path):
        """Test that another seed writes other files."""
        first = synth_generate(2, 2, 64, seed=1, out_dir=tmp_path / "a")
        second = synth_generate(2, 2, 64, seed=2, out_dir=tmp_path / "b")
        assert _files(first.root) != _files(second.root)

    def test_layout(self, synthetic_corpus):
        """Test the product folders, image and mask pairs and the manifest."""
        root = synthetic_corpus.root
        images = sorted(p for p in root.rglob("img_*.png") if not p.stem.endswith("_label"))
        masks = sorted(root.rglob("img_*_label.png"))
        assert len(images) == len(masks) == 12
        assert synthetic_corpus.products == 4
        assert synthetic_corpus.manifest_path.exists()

    @pytest.mark.parametrize("size", [100, 0, (64, 96)])
    def test_size_must_be_multiple_of_64(self, tmp_path, size):
        """Test rejecting sizes that are not multiples of 64."""
        with pytest.raises(ValidationError):
            synth_generate(1, 1, size, seed=0, out_dir=tmp_path)

    def test_rectangular_size(self, tmp_path):
        """Test generating non-square images."""
        corpus = synth_generate(1, 0, (128, 64), seed=0, out_dir=tmp_path)
        assert corpus.n_pos == 1

    def test_needs_images(self, tmp_path):
        """Test asking for no images at all."""
        with pytest.raises(ValidationError):
            synth_generate(0, 0, 64, seed=0, out_dir=tmp_path)


@pytest.mark.unit
class TestRenderSample:
    """Tests for render_sample."""

    def test_clean_sample(self):
        """Test that a clean sample is its background with an empty mask."""
        rendered = render_sample(np.random.SeedSequence(0), 64, 64, defective=False)
        assert not rendered.mask.any()
        np.testing.assert_array_equal(rendered.image, rendered.background)

    def test_crack_changes_only_masked_pixels(self):
        """Test that painting a crack only touches masked pixels."""
        rendered = render_sample(np.random.SeedSequence(4), 64, 64, defective=True)
        assert rendered.mask.any()
        changed = rendered.image != rendered.background
        assert not (changed & ~rendered.mask).any()
        assert 1 <= rendered.width <= 4

    def test_image_in_unit_range(self):
        """Test that rendered images stay in [0, 1]."""
        rendered = render_sample(np.random.SeedSequence(9), 128, 64, defective=True)
        assert rendered.image.min() >= 0.0 and rendered.image.max() <= 1.0
        assert rendered.image.shape == (128, 64)
