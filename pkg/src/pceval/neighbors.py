"""Exact nearest-neighbor, k-nearest-neighbor and ball queries.

All queries are exact (vectorized scans, no approximate index) with a fixed
tie rule: candidates are ordered by (distance, index) ascending.  Metric
matchings depend on exact minima, so approximation is not an option here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Neighbor selection rule for plane fitting: fixed count or fixed radius."""

    kind: str  # "knn" | "ball"
    k: int = 20
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "knn":
            if self.k < 3:
                raise InvalidArgumentError("knn neighborhoods need k >= 3 for plane fitting")
        elif self.kind == "ball":
            if not self.radius > 0:
                raise InvalidArgumentError("ball neighborhoods need radius > 0")
        else:
            raise InvalidArgumentError(f"unknown neighborhood kind {self.kind!r}")

    def label(self) -> str:
        return f"knn{self.k}" if self.kind == "knn" else f"ball{self.radius:g}"


def _sq_dists(query, cloud: PointCloud) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(3)
    d = cloud.points - q
    return (d * d).sum(axis=1)


def nearest(query, cloud: PointCloud, exclude: int | None = None) -> tuple[int, float]:
    """Index and distance of the exact nearest point, lowest index on ties."""
    sq = _sq_dists(query, cloud)
    if exclude is not None:
        if len(cloud) < 2:
            raise InvalidArgumentError("cannot exclude the only point of a cloud")
        sq = sq.copy()
        sq[exclude] = np.inf
    idx = int(np.argmin(sq))  # first occurrence: lowest index
    return idx, float(np.sqrt(sq[idx]))


def knn(query, cloud: PointCloud, k: int, exclude: int | None = None) -> np.ndarray:
    """Indices of the k nearest points sorted by (distance, index) ascending."""
    sq = _sq_dists(query, cloud)
    if exclude is not None:
        sq = sq.copy()
        sq[exclude] = np.inf
    n = len(cloud) - (1 if exclude is not None else 0)
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must be in [1, {n}], got {k}")
    order = np.argsort(sq, kind="stable")  # stable: equal distances keep index order
    return order[:k].astype(np.int64)


def ball(query, cloud: PointCloud, radius: float) -> np.ndarray:
    """Indices with distance <= radius (inclusive), ascending by index."""
    if not radius > 0:
        raise InvalidArgumentError("radius must be positive")
    sq = _sq_dists(query, cloud)
    return np.nonzero(sq <= radius * radius)[0].astype(np.int64)


def knn_indices_all(points: np.ndarray, k: int) -> np.ndarray:
    """For every point of ``points``, its k nearest among ``points``.

    Rows are sorted by (distance, index); the query point itself is at
    distance 0 and therefore always included.  Ties crossing the selection
    boundary are resolved toward lower indices, matching :func:`knn`.
    """
    from scipy.spatial.distance import cdist

    n = points.shape[0]
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must be in [1, {n}], got {k}")
    out = np.empty((n, k), dtype=np.int64)
    chunk = max(1, int(2**23 // max(n, 1)))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        sq = cdist(points[s:e], points, "sqeuclidean")
        if k == n:
            sel = np.broadcast_to(np.arange(n), (e - s, n)).copy()
        else:
            sel = np.argpartition(sq, k - 1, axis=1)[:, :k]
        dsel = np.take_along_axis(sq, sel, axis=1)
        dmax = dsel.max(axis=1)
        # repair rows where the boundary distance ties with unselected points
        spill = (sq <= dmax[:, None]).sum(axis=1) > k
        for r in np.nonzero(spill)[0]:
            cand = np.nonzero(sq[r] <= dmax[r])[0]  # ascending index
            order = np.argsort(sq[r, cand], kind="stable")
            sel[r] = cand[order[:k]]
        sel_by_index = np.sort(sel, axis=1)
        d_by_index = np.take_along_axis(sq, sel_by_index, axis=1)
        final = np.argsort(d_by_index, axis=1, kind="stable")
        out[s:e] = np.take_along_axis(sel_by_index, final, axis=1)
    return out
