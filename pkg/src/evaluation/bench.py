"""Forward-pass timing and the analytic cost model."""

import logging
import time
from dataclasses import asdict, dataclass
from typing import List

import numpy as np

from ..network.model import DefectNet, mac_count

logger = logging.getLogger(__name__)


@dataclass
class BenchResult:
    height: int
    width: int
    repeats: int
    median_ms: float
    min_ms: float
    max_ms: float
    spread_ms: float
    macs: int

    def to_dict(self) -> dict:
        return asdict(self)


def bench_forward(
    model: DefectNet, height: int, width: int, repeats: int = 10, warmup: int = 1, seed: int = 0
) -> BenchResult:
    """Median wall-clock milliseconds of one inference (segmentation + decision).

    Warm-up passes are run first and excluded. ``spread_ms`` is the
    interquartile range of the timed passes.
    """
    rng = np.random.default_rng(seed)
    image = rng.random((height, width)).astype(model.segmentation.dtype)
    for _ in range(warmup):
        model.score(image)

    timings: List[float] = []
    for _ in range(max(repeats, 1)):
        start = time.perf_counter()
        model.score(image)
        timings.append((time.perf_counter() - start) * 1000.0)

    values = np.asarray(timings)
    q1, q3 = np.percentile(values, [25, 75])
    result = BenchResult(
        height=height,
        width=width,
        repeats=len(timings),
        median_ms=float(np.median(values)),
        min_ms=float(values.min()),
        max_ms=float(values.max()),
        spread_ms=float(q3 - q1),
        macs=mac_count(model, height, width),
    )
    logger.info(
        "Forward %dx%d: median %.1f ms over %d runs (IQR %.1f ms), %.3g MACs",
        height,
        width,
        result.median_ms,
        result.repeats,
        result.spread_ms,
        result.macs,
    )
    return result
