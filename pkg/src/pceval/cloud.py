"""Point cloud containers and basic geometry.

A :class:`PointCloud` is an immutable, ordered list of finite 3-D points
stored as a read-only ``float64`` array of shape ``(n, 3)``.  Point order is
preserved exactly as constructed: normals and neighbor indices refer to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import InvalidArgumentError
from .rng import generator


class PointCloud:
    """Ordered, immutable set of 3-D points.

    Parameters
    ----------
    points : array-like of shape (n, 3)
        Coordinates; must be finite and non-empty.  Widened to float64.
    id : str, optional
        Label carried through loading and reporting.
    """

    __slots__ = ("_points", "id", "_diameter", "_barycenter")

    def __init__(self, points, id: str | None = None):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1 and pts.size == 3:
            pts = pts.reshape(1, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidArgumentError(f"points must have shape (n, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise InvalidArgumentError("a point cloud must contain at least one point")
        if not np.isfinite(pts).all():
            raise InvalidArgumentError("point coordinates must be finite")
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        self._points = pts
        self.id = id
        self._diameter = None
        self._barycenter = None

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return self._points.shape[0]

    def __getitem__(self, i: int) -> np.ndarray:
        return self._points[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self._points.shape == other._points.shape and bool(
            (self._points == other._points).all()
        )

    def __hash__(self):
        return hash(self._points.tobytes())

    def __repr__(self) -> str:
        label = f" id={self.id!r}" if self.id else ""
        return f"PointCloud(n={len(self)}{label})"

    def with_points(self, points) -> "PointCloud":
        return PointCloud(points, id=self.id)


@dataclass(frozen=True)
class CloudSet:
    """Ordered collection of clouds tagged with its role in an evaluation."""

    clouds: tuple[PointCloud, ...]
    role: str = "generated"  # "generated" | "reference"

    def __post_init__(self):
        object.__setattr__(self, "clouds", tuple(self.clouds))
        if len(self.clouds) < 1:
            raise InvalidArgumentError("a cloud set must contain at least one cloud")
        if self.role not in ("generated", "reference"):
            raise InvalidArgumentError(f"unknown role {self.role!r}")

    def __len__(self) -> int:
        return len(self.clouds)

    def __getitem__(self, i: int) -> PointCloud:
        return self.clouds[i]

    def __iter__(self):
        return iter(self.clouds)

    def content_key(self) -> bytes:
        """Digest of the set contents, used to key distance-table caches."""
        import hashlib

        h = hashlib.sha256()
        for c in self.clouds:
            h.update(np.asarray(c.points.shape, dtype=np.int64).tobytes())
            h.update(c.points.tobytes())
        return h.digest()


def barycenter(cloud: PointCloud) -> np.ndarray:
    """Arithmetic mean of the cloud's coordinates."""
    if cloud._barycenter is None:
        cloud._barycenter = cloud.points.mean(axis=0)
        cloud._barycenter.flags.writeable = False
    return cloud._barycenter


def center(cloud: PointCloud) -> PointCloud:
    """Translate the cloud so its barycenter sits at the origin."""
    return cloud.with_points(cloud.points - barycenter(cloud))


def diameter(cloud: PointCloud) -> float:
    """Maximum inter-point Euclidean distance (0 for a single point)."""
    if cloud._diameter is None:
        if len(cloud) == 1:
            cloud._diameter = 0.0
        else:
            cloud._diameter = float(pdist(cloud.points).max())
    return cloud._diameter


def fps_sample(cloud: PointCloud, m: int, start: int = 0) -> PointCloud:
    """Greedy farthest-point subsample of ``m`` points.

    The first pick is ``start``; every later pick maximizes the minimum
    distance to the points already selected, ties broken by lowest index.
    Result order is selection order.
    """
    n = len(cloud)
    if not 1 <= m <= n:
        raise InvalidArgumentError(f"m must be in [1, {n}], got {m}")
    if not 0 <= start < n:
        raise InvalidArgumentError(f"start must be in [0, {n}), got {start}")
    pts = cloud.points
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = start
    min_sq = ((pts - pts[start]) ** 2).sum(axis=1)
    for i in range(1, m):
        nxt = int(np.argmax(min_sq))  # argmax takes the first max: lowest index
        chosen[i] = nxt
        min_sq = np.minimum(min_sq, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return cloud.with_points(pts[chosen])


def random_sample(cloud: PointCloud, m: int, seed: int) -> PointCloud:
    """Uniform subsample of ``m`` distinct points, deterministic per seed."""
    n = len(cloud)
    if not 1 <= m <= n:
        raise InvalidArgumentError(f"m must be in [1, {n}], got {m}")
    idx = generator(seed).choice(n, size=m, replace=False)
    return cloud.with_points(cloud.points[idx])
