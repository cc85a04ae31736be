"""Shared pytest fixtures for the defect-detection tests.

Full-size networks cost tens of GFLOPs per forward pass, so most tests use
narrow layouts with the same topology (three 2x2 pools in the segmentation
network, three in the decision network).
"""

import logging

import numpy as np
import pytest

from src.dataio.sample import Sample
from src.dataio.synth import synth_generate
from src.network.model import build_defect_net
from src.network.units import ConvSpec, PoolSpec

TINY_SEGMENTATION_LAYOUT = (
    ConvSpec("conv1", 4, 3),
    PoolSpec("pool1"),
    ConvSpec("conv2", 4, 3),
    PoolSpec("pool2"),
    ConvSpec("conv3", 4, 3),
    PoolSpec("pool3"),
    ConvSpec("conv4", 6, 3),
    ConvSpec("conv5", 1, 1, norm=False, relu=False),
)

TINY_DECISION_LAYOUT = (
    PoolSpec("pool1"),
    ConvSpec("conv1", 3, 3),
    PoolSpec("pool2"),
    ConvSpec("conv2", 3, 3),
    PoolSpec("pool3"),
    ConvSpec("conv3", 4, 3),
)

# Wide enough to learn the synthetic cracks, small enough for a CPU test run
ACCEPTANCE_SEGMENTATION_LAYOUT = (
    ConvSpec("conv1", 8, 5),
    ConvSpec("conv2", 8, 5),
    PoolSpec("pool1"),
    ConvSpec("conv3", 16, 5),
    ConvSpec("conv4", 16, 5),
    PoolSpec("pool2"),
    ConvSpec("conv5", 16, 5),
    ConvSpec("conv6", 16, 5),
    PoolSpec("pool3"),
    ConvSpec("conv7", 32, 7),
    ConvSpec("conv8", 1, 1, norm=False, relu=False),
)

ACCEPTANCE_DECISION_LAYOUT = (
    PoolSpec("pool1"),
    ConvSpec("conv1", 8, 5),
    PoolSpec("pool2"),
    ConvSpec("conv2", 16, 5),
    PoolSpec("pool3"),
    ConvSpec("conv3", 16, 5),
)


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow", action="store_true", default=False, help="Run tests marked slow"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _restore_root_logging():
    """Undo handlers the CLI commands attach to the root logger.

    Those handlers bind to the test's captured stderr, which is closed once
    the test ends.
    """
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(level)


@pytest.fixture
def rng():
    """Seeded generator so random test inputs are reproducible."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model():
    """Factory for a narrow two-stage model.

    Returns:
        callable: ``tiny_model(seed=0, dtype=np.float64) -> DefectNet``
    """

    def build(seed=0, dtype=np.float64):
        return build_defect_net(seed, TINY_SEGMENTATION_LAYOUT, TINY_DECISION_LAYOUT, dtype)

    return build


@pytest.fixture
def acceptance_model():
    """Factory for the mid-sized model used where training has to reach a target.

    Returns:
        callable: ``acceptance_model(seed=0, dtype=np.float64) -> DefectNet``
    """

    def build(seed=0, dtype=np.float64):
        return build_defect_net(
            seed, ACCEPTANCE_SEGMENTATION_LAYOUT, ACCEPTANCE_DECISION_LAYOUT, dtype
        )

    return build


@pytest.fixture
def make_sample():
    """Factory for in-memory samples.

    Returns:
        callable: ``make_sample(image_id, defective, product_id=None, size=64, seed=0)``
    """

    def build(image_id, defective, product_id=None, size=64, seed=0):
        generator = np.random.default_rng(seed)
        image = generator.random((size, size)) * 0.5 + 0.25
        mask = np.zeros((size, size), dtype=bool)
        if defective:
            row = int(generator.integers(8, size - 8))
            mask[row, 8 : size - 8] = True
            image[mask] = 0.95
        return Sample(
            image=image,
            mask=mask,
            product_id=product_id or f"prod_{image_id}",
            image_id=image_id,
        )

    return build


@pytest.fixture
def synthetic_corpus(tmp_path):
    """Small seeded synthetic corpus on disk (6 defective, 6 clean, 64x64)."""
    return synth_generate(6, 6, 64, seed=3, out_dir=tmp_path / "corpus")


@pytest.fixture
def tiny_default_networks(monkeypatch):
    """Make every default-layout model the CLI and pipeline build a narrow one."""

    def build(seed, segmentation_layout=None, decision_layout=None, dtype=np.float64):
        return build_defect_net(seed, TINY_SEGMENTATION_LAYOUT, TINY_DECISION_LAYOUT, dtype)

    for module in ("src.training.pipeline", "src.network.weights", "src.cli.commands"):
        monkeypatch.setattr(f"{module}.build_defect_net", build)
    return build


@pytest.fixture
def acceptance_networks(monkeypatch):
    """Make every default-layout model the CLI and pipeline build a mid-sized one."""

    def build(seed, segmentation_layout=None, decision_layout=None, dtype=np.float64):
        return build_defect_net(
            seed, ACCEPTANCE_SEGMENTATION_LAYOUT, ACCEPTANCE_DECISION_LAYOUT, dtype
        )

    for module in ("src.training.pipeline", "src.network.weights", "src.cli.commands"):
        monkeypatch.setattr(f"{module}.build_defect_net", build)
    return build
