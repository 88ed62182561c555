"""Approximate centroidal Voronoi tessellations via uniform sampling and k-means."""
from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .domain import STREAM_CVT, Bounds, make_rng

logger = logging.getLogger(__name__)


@dataclass
class CentroidSet:
    centroids: np.ndarray
    bounds: Optional[Bounds] = None
    samples: int = 0
    iterations: int = 0
    quantization_error: float = float("nan")
    error_history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)


def sample_points(K: int, bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """``K`` independent uniform points in the bounding box."""
    if K < 1:
        raise ValueError(f"need at least one sample point, got K={K}")
    return bounds.sample(rng, K)


def _sq_dist_to(cols, point):
    d2 = np.square(cols[0] - point[0])
    for c, p in zip(cols[1:], point[1:]):
        d2 += np.square(c - p)
    return d2


def _kmeanspp_seed(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(data)
    cols = [np.ascontiguousarray(data[:, j]) for j in range(data.shape[1])]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dist_to(cols, data[chosen[0]])
    for _ in range(1, k):
        cdf = np.cumsum(d2)
        total = cdf[-1]
        if total > 0:
            i = min(int(np.searchsorted(cdf, rng.random() * total, side="right")), n - 1)
        else:
            # all remaining mass at zero distance (duplicates): any unchosen point
            free = np.setdiff1d(np.arange(n), chosen)
            i = int(free[rng.integers(len(free))])
        chosen.append(i)
        np.minimum(d2, _sq_dist_to(cols, data[i]), out=d2)
    return data[chosen].copy()


def _assign(data, centroids):
    if centroids.shape[1] <= 8:
        idx = cKDTree(centroids).query(data, k=1)[1]
    else:
        # brute force for high-dimensional descriptor spaces
        d2 = (np.sum(data ** 2, axis=1)[:, None] - 2 * data @ centroids.T
              + np.sum(centroids ** 2, axis=1)[None, :])
        idx = np.argmin(d2, axis=1)
    d2min = np.sum((data - centroids[idx]) ** 2, axis=1)
    return idx, d2min


def kmeans_lloyd(data, k: int, rng: np.random.Generator, max_iters: int = 100,
                 tol: float = 1e-6) -> CentroidSet:
    """Lloyd's algorithm from k-means++ (D^2-weighted farthest-point) seeding.

    Stops once the largest centroid displacement drops below ``tol`` or after
    ``max_iters`` updates. An empty cluster is re-seeded at the data point
    currently farthest from its assigned centroid. ``error_history`` holds the
    mean squared quantization error after every assignment step.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    n = len(data)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of data points ({n})")
    centroids = _kmeanspp_seed(data, k, rng)
    history = []
    it = 0
    while True:
        idx, d2 = _assign(data, centroids)
        history.append(float(d2.mean()))
        if it >= max_iters:
            break
        counts = np.bincount(idx, minlength=k)
        new = np.empty_like(centroids)
        for j in range(data.shape[1]):
            new[:, j] = np.bincount(idx, weights=data[:, j], minlength=k)
        nonempty = counts > 0
        new[nonempty] /= counts[nonempty, None]
        empty = np.flatnonzero(~nonempty)
        if len(empty):
            far = np.argsort(-d2, kind="stable")[:len(empty)]
            new[empty] = data[far]
            logger.debug("re-seeded %d empty cluster(s)", len(empty))
        move = float(np.max(np.linalg.norm(new - centroids, axis=1)))
        centroids = new
        it += 1
        if move < tol and not len(empty):
            idx, d2 = _assign(data, centroids)
            history.append(float(d2.mean()))
            break
    return CentroidSet(centroids=centroids, samples=n, iterations=it,
                       quantization_error=history[-1], error_history=history)


def _cache_path(cache_dir, k, K, d, seed):
    return os.path.join(cache_dir, f"centroids_k{k}_K{K}_d{d}_seed{seed}.csv")


def save_centroids(path, unit_centroids: np.ndarray):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    d = unit_centroids.shape[1]
    with open(path, "w") as fh:
        fh.write(",".join(f"c{j}" for j in range(d)) + "\n")
        for row in unit_centroids:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_centroids(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, dtype=float))


def cvt_build(k: int, bounds: Bounds, seed: int, K: Optional[int] = None,
              max_iters: int = 100, tol: float = 1e-6, cache_dir: Optional[str] = None,
              sampler: Optional[Callable[[int, np.random.Generator], np.ndarray]] = None) -> CentroidSet:
    """Build ``k`` CVT centroids from ``K`` uniform samples (default ``K = 100 k``).

    Clustering runs in the unit cube and the result is scaled to ``bounds``.
    With ``cache_dir`` set, the unit-cube centroids are stored under a name
    keyed by (k, K, d, seed) and reused. The uniform sampler assumes
    independent descriptor dimensions; pass ``sampler`` (returning unit-cube
    points) for structured descriptors such as trajectories.
    """
    if K is None:
        K = 100 * k
    if K < 10 * k:
        raise ValueError(f"K={K} too small for k={k}: need K >= 10*k")
    if K < 100 * k:
        warnings.warn(f"K={K} < 100*k; centroids may be poorly spread", stacklevel=2)
    d = bounds.dim
    unit = None
    path = _cache_path(cache_dir, k, K, d, seed) if cache_dir else None
    meta = {}
    if path and os.path.exists(path):
        unit = load_centroids(path)
        if unit.shape != (k, d):
            raise ValueError(f"cached centroids at {path} have shape {unit.shape}, expected {(k, d)}")
        logger.info("loaded %d centroids from %s", k, path)
    if unit is None:
        rng = make_rng(seed, STREAM_CVT)
        unit_box = Bounds.uniform(d, 0.0, 1.0)
        data = sampler(K, rng) if sampler is not None else sample_points(K, unit_box, rng)
        cs = kmeans_lloyd(data, k, rng, max_iters=max_iters, tol=tol)
        unit = cs.centroids
        meta = dict(iterations=cs.iterations, quantization_error=cs.quantization_error,
                    error_history=cs.error_history)
        if path:
            save_centroids(path, unit)
    return CentroidSet(centroids=bounds.lo + unit * bounds.span, bounds=bounds, samples=K, **meta)


def nearest_centroid(descriptor, centroids) -> int:
    """Index of the closest centroid (Euclidean); ties go to the lowest index."""
    c = np.asarray(getattr(centroids, "centroids", centroids), dtype=float)
    if c.size == 0:
        raise ValueError("empty centroid set")
    b = np.asarray(descriptor, dtype=float)
    return int(np.argmin(np.sum((c - b) ** 2, axis=1)))
