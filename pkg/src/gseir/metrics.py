"""Normalized squared-error terms shared by fitting and scoring."""
from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    pass


def normalized_sse(predicted: np.ndarray, actual: np.ndarray, strict: bool = True) -> float:
    """``sum((predicted - actual)**2) / sum((actual - mean(actual))**2)``.

    A constant ``actual`` has a zero normalizer: an error when ``strict``,
    otherwise the normalizer falls back to 1 (plain SSE in persons squared).
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise MetricError(f"shape mismatch {predicted.shape} vs {actual.shape}")
    norm = float(np.sum((actual - actual.mean()) ** 2))
    if norm == 0.0:
        if strict:
            raise MetricError("observed series is constant; normalizer is zero")
        norm = 1.0
    return float(np.sum((predicted - actual) ** 2)) / norm
