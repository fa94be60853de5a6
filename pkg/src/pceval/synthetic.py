"""Synthetic cloud generators for tests and desk-scale studies.

Shapes are surfaces (sphere, box, plane patch) with optional per-point
jitter, produced from explicit seeds through the project PRNG policy so
every set is reproducible.
"""

from __future__ import annotations

import numpy as np

from .cloud import CloudSet, PointCloud
from .rng import derive_seed, generator

SHAPE_KINDS = ("sphere", "box", "plane")


def sphere_cloud(n: int, seed: int, radius: float = 0.5,
                 jitter: float = 0.01, id: str | None = None) -> PointCloud:
    rng = generator(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    pts = v * radius
    if jitter > 0:
        pts = pts + rng.normal(scale=jitter, size=(n, 3))
    return PointCloud(pts, id=id)


def box_cloud(n: int, seed: int, half_extents=(0.5, 0.35, 0.4),
              jitter: float = 0.01, id: str | None = None) -> PointCloud:
    rng = generator(seed)
    half = np.asarray(half_extents, dtype=np.float64)
    pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
    face_axis = rng.integers(0, 3, size=n)
    face_sign = rng.choice(np.array([-1.0, 1.0]), size=n)
    pts[np.arange(n), face_axis] = face_sign * half[face_axis]
    if jitter > 0:
        pts = pts + rng.normal(scale=jitter, size=(n, 3))
    return PointCloud(pts, id=id)


def plane_cloud(n: int, seed: int, half_extent: float = 0.5,
                jitter: float = 0.01, id: str | None = None) -> PointCloud:
    rng = generator(seed)
    pts = np.zeros((n, 3))
    pts[:, :2] = rng.uniform(-half_extent, half_extent, size=(n, 2))
    if jitter > 0:
        pts = pts + rng.normal(scale=jitter, size=(n, 3))
    return PointCloud(pts, id=id)


def shape_cloud(kind: str, n: int, seed: int, scale: float = 1.0,
                jitter: float = 0.01, id: str | None = None) -> PointCloud:
    if kind == "sphere":
        c = sphere_cloud(n, seed, radius=0.5 * scale, jitter=jitter, id=id)
    elif kind == "box":
        c = box_cloud(n, seed, half_extents=(0.5 * scale, 0.35 * scale, 0.4 * scale),
                      jitter=jitter, id=id)
    elif kind == "plane":
        c = plane_cloud(n, seed, half_extent=0.5 * scale, jitter=jitter, id=id)
    else:
        raise ValueError(f"unknown shape kind {kind!r}")
    return c


def mixed_set(n_clouds: int, n_points: int, seed: int, role: str = "generated",
              jitter: float = 0.01, kinds=SHAPE_KINDS) -> CloudSet:
    """A set of mixed shapes with randomized per-cloud size and offset.

    Cloud i draws its kind, scale and placement from a child stream of
    ``seed``, so sets with different seeds are independent draws from the
    same distribution.
    """
    clouds = []
    for i in range(n_clouds):
        s = derive_seed(seed, i)
        rng = generator(derive_seed(seed, i, 1))
        kind = kinds[int(rng.integers(0, len(kinds)))]
        scale = float(rng.uniform(0.7, 1.3))
        offset = rng.uniform(-0.2, 0.2, size=3)
        cloud = shape_cloud(kind, n_points, s, scale=scale, jitter=jitter,
                            id=f"{role[:3]}-{i:04d}-{kind}")
        clouds.append(PointCloud(cloud.points + offset, id=cloud.id))
    return CloudSet(tuple(clouds), role=role)


def single_kind_set(kind: str, n_clouds: int, n_points: int, seed: int,
                    role: str = "generated", jitter: float = 0.01) -> CloudSet:
    """A set of one shape family with randomized scale, for calibration runs."""
    return mixed_set(n_clouds, n_points, seed, role=role, jitter=jitter,
                     kinds=(kind,))
