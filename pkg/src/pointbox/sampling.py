"""Point resampling and farthest point sampling."""
from __future__ import annotations

import numpy as np

from .errors import BadCount, EmptyCloud


def make_rng(seed: int) -> np.random.Generator:
    """Explicit RNG state; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def resample_indices(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise BadCount(f"n must be >= 1, got {n}")
    if count == 0:
        raise EmptyCloud("cannot resample an empty point cloud")
    if count >= n:
        return rng.permutation(count)[:n]
    return rng.integers(0, count, size=n)


def resample(points: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Return exactly ``n`` points; without replacement when possible."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return points[resample_indices(len(points), n, rng)]


def farthest_point_sample(points: np.ndarray, m: int) -> np.ndarray:
    """Greedy FPS starting at index 0; ties go to the lowest index."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(points)
    if m < 1 or m > n:
        raise BadCount(f"need 1 <= m <= {n}, got m={m}")
    selected = np.empty(m, dtype=np.int64)
    selected[0] = 0
    min_d2 = np.sum((points - points[0]) ** 2, axis=1)
    min_d2[0] = -1.0
    for k in range(1, m):
        idx = int(np.argmax(min_d2))
        selected[k] = idx
        d2 = np.sum((points - points[idx]) ** 2, axis=1)
        np.minimum(min_d2, d2, out=min_d2)
        min_d2[idx] = -1.0
    return selected
