"""Shared deterministic toy datasets for tests."""
from __future__ import annotations

import numpy as np

from qkbench._rng import stream


def qkt_signal_noise_toy(m: int = 24):
    """Two-feature instance: feature 0 carries (jittered) label signal,
    feature 1 is pure large-amplitude noise."""
    rng = stream(123, "qkt-toy")
    y = np.array([1, -1] * (m // 2))
    x0 = 0.5 * y.astype(float) + np.array([rng.uniform(-0.15, 0.15) for _ in range(m)])
    x1 = np.array([rng.uniform(-2.0, 2.0) for _ in range(m)])
    return np.column_stack([x0, x1]), y
