"""Deterministic sample grids and the worker pool used by stability sweeps."""

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

logger = logging.getLogger(__name__)

Bounds = Sequence[Tuple[float, float]]


def halton_points(bounds: Bounds, n_points: int, *, seed: int = 0) -> np.ndarray:
    """
    Scrambled Halton points in a box.

    Parameters
    ----------
    bounds : sequence of (low, high)
        One interval per coordinate
    n_points : int
        Number of points
    seed : int
        Scrambling seed; the same seed always yields the same points

    Returns
    -------
    np.ndarray
        Array of shape (n_points, len(bounds))
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2 or np.any(bounds[:, 1] < bounds[:, 0]):
        raise ValueError(f"bounds must be a list of (low, high) pairs, got {bounds.tolist()}")
    sampler = qmc.Halton(d=len(bounds), scramble=True, seed=seed)
    unit = sampler.random(n_points)
    # intervals may be degenerate (low == high)
    return bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])


def pinned_copies(points: np.ndarray, bounds: Bounds) -> np.ndarray:
    """
    Copies of points with coordinates set to zero: each single coordinate,
    each pair, and all of them together (only coordinates whose interval
    contains 0).
    """
    zero_coords = [i for i, (lo, hi) in enumerate(bounds) if lo <= 0.0 <= hi]
    subsets = set()
    for size in (1, 2):
        subsets.update(itertools.combinations(zero_coords, size))
    if zero_coords:
        subsets.add(tuple(zero_coords))
    copies = []
    for subset in sorted(subsets):
        copy = np.array(points, dtype=float, copy=True)
        copy[:, list(subset)] = 0.0
        copies.append(copy)
    if not copies:
        return np.empty((0, points.shape[1]))
    return np.unique(np.concatenate(copies), axis=0)


def box_samples(
    bounds: Bounds,
    n_points: int,
    *,
    seed: int = 0,
    pin_zero: bool = True,
    extra: Optional[Sequence[Sequence[float]]] = None,
) -> np.ndarray:
    """Halton points plus pinned copies plus explicitly requested points."""
    points = halton_points(bounds, n_points, seed=seed)
    parts = [points]
    if pin_zero:
        parts.append(pinned_copies(points, bounds))
    if extra is not None and len(extra) > 0:
        parts.append(np.asarray(extra, dtype=float).reshape(-1, len(bounds)))
    return np.concatenate(parts)


def scaled_samples(unit_bounds: Bounds, radius: float, n_points: int, *, seed: int = 0) -> np.ndarray:
    """Halton points of a unit box scaled by radius (samples near sets through the origin)."""
    return radius * halton_points(unit_bounds, n_points, seed=seed)


def sweep(func: Callable, items: List, *, workers: int = 1, label: str = "items") -> List:
    """
    Apply func to every item, in a process pool when workers > 1.

    Results are returned in item order, so reports do not depend on the
    worker count. func must be picklable (a module-level function or a
    functools.partial of one).
    """
    total = len(items)
    results = []
    step = max(1, total // 10)
    if workers <= 1 or total <= 1:
        iterator = map(func, items)
        executor = None
    else:
        executor = ProcessPoolExecutor(max_workers=workers)
        iterator = executor.map(func, items)
    try:
        for completed, result in enumerate(iterator, start=1):
            results.append(result)
            if completed % step == 0 or completed == total:
                logger.info("Progress: %d/%d %s (%d%%)", completed, total, label, 100 * completed // total)
    finally:
        if executor is not None:
            executor.shutdown()
    return results
