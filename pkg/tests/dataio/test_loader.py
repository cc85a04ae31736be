"""Tests for dataset loading, samples and the corpus manifest."""

import logging

import numpy as np
import pytest
from PIL import Image

from src.common.config import DatasetConfig
from src.common.errors import (
    DataError,
    DimensionMismatchError,
    MissingMaskError,
    UnreadableFileError,
)
from src.dataio.loader import load_dataset, read_grayscale, read_manifest, write_manifest
from src.dataio.sample import DEFECTIVE, NON_DEFECTIVE, Sample, split_by_label


def _write(path, array):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array.astype(np.uint8), mode="L").save(path)


@pytest.mark.unit
class TestSample:
    """Tests for the Sample record."""

    def test_labels(self, make_sample):
        """Test the label and target of defective and clean samples."""
        positive, negative = make_sample("a", True), make_sample("b", False)
        assert positive.label == DEFECTIVE and positive.target == 1.0
        assert negative.label == NON_DEFECTIVE and negative.target == 0.0

    def test_mask_thresholded(self):
        """Test that any mask value above 0 marks a defect."""
        sample = Sample(np.zeros((2, 2)), np.array([[0, 3], [0, 0]]), "p", "p/x")
        assert sample.mask.dtype == np.bool_
        assert sample.mask.sum() == 1

    def test_shape_mismatch(self):
        """Test rejecting an image and mask of different sizes."""
        with pytest.raises(DimensionMismatchError):
            Sample(np.zeros((4, 4)), np.zeros((4, 5), dtype=bool), "p", "p/x")

    def test_split_preserves_order(self, make_sample):
        """Test splitting by label keeps the input order."""
        samples = [make_sample(str(i), i % 3 == 0) for i in range(7)]
        positives, negatives = split_by_label(samples)
        assert [s.image_id for s in positives] == ["0", "3", "6"]
        assert [s.image_id for s in negatives] == ["1", "2", "4", "5"]


@pytest.mark.unit
class TestLoadDataset:
    """Tests for load_dataset."""

    def test_synthetic_corpus(self, synthetic_corpus):
        """Test loading a generated corpus."""
        samples = load_dataset(synthetic_corpus.root)
        assert len(samples) == 12
        assert sum(s.defective for s in samples) == 6
        assert len({s.product_id for s in samples}) == 4
        assert samples[0].image_id == "prod_000/img_0000"
        assert samples[0].image.shape == (64, 64)
        assert 0.0 <= samples[0].image.min() and samples[0].image.max() <= 1.0

    def test_threads_give_same_result(self, synthetic_corpus):
        """Test that threaded loading gives the serial result."""
        serial = load_dataset(synthetic_corpus.root)
        threaded = load_dataset(synthetic_corpus.root, jobs=3)
        assert [s.image_id for s in serial] == [s.image_id for s in threaded]
        for a, b in zip(serial, threaded):
            np.testing.assert_array_equal(a.image, b.image)

    def test_resize(self, synthetic_corpus):
        """Test resizing images and masks on load."""
        layout = DatasetConfig(root=str(synthetic_corpus.root), image_size=(128, 64))
        samples = load_dataset(synthetic_corpus.root, layout)
        assert all(s.image.shape == (128, 64) for s in samples)
        assert all(s.mask.dtype == np.bool_ for s in samples)
        assert sum(s.defective for s in samples) == 6

    def test_empty_directory_warns(self, tmp_path, caplog):
        """Test that a directory without images logs a warning."""
        with caplog.at_level(logging.WARNING):
            assert load_dataset(tmp_path) == []
        assert "No images found" in caplog.text

    def test_missing_root(self, tmp_path):
        """Test loading from a root that does not exist."""
        with pytest.raises(DataError):
            load_dataset(tmp_path / "absent")

    def test_missing_mask(self, tmp_path):
        """Test that an image without a mask names the image."""
        _write(tmp_path / "prod" / "a.png", np.zeros((8, 8)))
        with pytest.raises(MissingMaskError) as exc_info:
            load_dataset(tmp_path)
        assert "a.png" in str(exc_info.value)

    def test_unreadable_image(self, tmp_path):
        """Test that an undecodable image is an unreadable-file error."""
        (tmp_path / "prod").mkdir()
        (tmp_path / "prod" / "a.png").write_bytes(b"not an image")
        _write(tmp_path / "prod" / "a_label.png", np.zeros((8, 8)))
        with pytest.raises(UnreadableFileError):
            load_dataset(tmp_path)

    def test_dimension_mismatch(self, tmp_path):
        """Test an image and mask file of different sizes."""
        _write(tmp_path / "prod" / "a.png", np.zeros((8, 8)))
        _write(tmp_path / "prod" / "a_label.png", np.zeros((8, 16)))
        with pytest.raises(DimensionMismatchError):
            load_dataset(tmp_path)

    def test_mask_with_other_suffix(self, tmp_path):
        """Test pairing a mask saved with another image suffix."""
        _write(tmp_path / "prod" / "a.png", np.full((8, 8), 128))
        mask = np.zeros((8, 8))
        mask[2, 3] = 255
        _write(tmp_path / "prod" / "a_label.bmp", mask)
        (sample,) = load_dataset(tmp_path)
        assert sample.defective
        assert sample.image[0, 0] == pytest.approx(128 / 255)

    def test_read_grayscale_converts_colour(self, tmp_path):
        """Test that colour files are read as grayscale."""
        path = tmp_path / "rgb.png"
        Image.new("RGB", (5, 3), (255, 0, 0)).save(path)
        assert read_grayscale(path).shape == (3, 5)


@pytest.mark.unit
class TestManifest:
    """Tests for the JSON-lines manifest."""

    def test_synthetic_manifest(self, synthetic_corpus):
        """Test that the generated manifest points at existing files."""
        records = read_manifest(synthetic_corpus.root)
        assert len(records) == 12
        assert sum(r["label"] for r in records) == 6
        for record in records:
            assert (synthetic_corpus.root / record["image"]).exists()
            assert (synthetic_corpus.root / record["mask"]).exists()

    def test_write_then_read(self, tmp_path):
        """Test reading back a written manifest."""
        records = [{"image": "p/a.png", "mask": "p/a_label.png", "label": 1, "product_id": "p"}]
        path = write_manifest(tmp_path, records)
        assert read_manifest(path) == records

    def test_missing_manifest(self, tmp_path):
        """Test reading a directory without a manifest."""
        with pytest.raises(DataError):
            read_manifest(tmp_path)

    def test_invalid_record(self, tmp_path):
        """Test a manifest with a broken line."""
        (tmp_path / "manifest.jsonl").write_text('{"image": 1}\n{broken\n', encoding="utf-8")
        with pytest.raises(DataError):
            read_manifest(tmp_path)
