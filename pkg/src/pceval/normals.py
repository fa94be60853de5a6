"""Per-point surface normals by least-squares plane fitting.

The normal at a point is the eigenvector with the smallest eigenvalue of
the covariance matrix of its neighborhood (the direction of least variance,
i.e. the fitted plane's normal).  Orientation is ambiguous; a deterministic
sign rule (first non-negligible component positive) is applied so repeated
runs and transformed clouds produce identical fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .cloud import PointCloud
from .errors import DegenerateNeighborhoodError, InvalidArgumentError
from .neighbors import NeighborhoodSpec, knn_indices_all

_SIGN_TOL = 1e-12
# eigenvalue gap below this fraction of the spectral norm marks a normal as
# unreliable (collinear or otherwise direction-degenerate neighborhood)
_GAP_TOL = 1e-10


@dataclass(frozen=True)
class NormalField:
    """Unit normals parallel to a cloud's point order, plus diagnostics."""

    normals: np.ndarray  # (n, 3), unit rows
    spec: NeighborhoodSpec
    unreliable: np.ndarray = field(repr=False, default=None)  # (n,) bool
    fallback_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "normals", np.asarray(self.normals, dtype=np.float64))
        self.normals.flags.writeable = False
        flags = (np.zeros(len(self.normals), dtype=bool) if self.unreliable is None
                 else np.asarray(self.unreliable, dtype=bool))
        flags.flags.writeable = False
        object.__setattr__(self, "unreliable", flags)

    def __len__(self):
        return len(self.normals)


def neighborhood_covariance(points) -> np.ndarray:
    """Covariance of a neighborhood: mean outer product of centered points."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidArgumentError(f"expected (m, 3) points, got {pts.shape}")
    if pts.shape[0] < 3:
        raise DegenerateNeighborhoodError(
            f"plane fitting needs at least 3 points, got {pts.shape[0]}"
        )
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / pts.shape[0]
    return (cov + cov.T) / 2.0  # exact symmetry despite rounding


def smallest_eigenvector(C) -> np.ndarray:
    """Unit eigenvector of the smallest eigenvalue, deterministic sign.

    The sign rule makes the first component larger than 1e-12 in magnitude
    positive.  Degenerate spectra resolve to whatever the symmetric
    eigensolver deterministically returns, sign rule applied on top.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (3, 3):
        raise InvalidArgumentError(f"expected a 3x3 matrix, got {C.shape}")
    scale = np.abs(C).max()
    if np.abs(C - C.T).max() > 1e-12 * max(1.0, scale):
        raise InvalidArgumentError("matrix is not symmetric")
    _, vecs = np.linalg.eigh(C)
    return _apply_sign_rule(vecs[:, 0].copy())


def _apply_sign_rule(v: np.ndarray) -> np.ndarray:
    for c in v:
        if abs(c) > _SIGN_TOL:
            if c < 0:
                v = -v
            break
    return v


def _batch_normals(neighborhoods: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normals for a stack of fixed-size neighborhoods (n, k, 3)."""
    centered = neighborhoods - neighborhoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / neighborhoods.shape[1]
    cov = (cov + cov.transpose(0, 2, 1)) / 2.0
    vals, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0].copy()
    spectral = np.abs(vals).max(axis=1)
    unreliable = (vals[:, 1] - vals[:, 0]) <= _GAP_TOL * np.maximum(spectral, 1e-300)
    # sign rule, vectorized: flip rows whose first non-negligible component
    # is negative
    mask = np.abs(normals) > _SIGN_TOL
    first = np.argmax(mask, axis=1)
    lead = normals[np.arange(len(normals)), first]
    flip = (lead < 0) & mask.any(axis=1)
    normals[flip] *= -1.0
    return normals, unreliable


def estimate_normals(cloud: PointCloud, spec: NeighborhoodSpec | None = None) -> NormalField:
    """Estimate a unit normal for every point of the cloud.

    Neighborhoods include the query point itself.  Ball neighborhoods with
    fewer than 3 points fall back to the 3 nearest points; the fallback
    count is reported on the returned field.
    """
    if spec is None:
        spec = NeighborhoodSpec("knn", k=20)
    pts = cloud.points
    n = len(cloud)
    if spec.kind == "knn":
        if spec.k > n:
            raise InvalidArgumentError(
                f"knn k={spec.k} exceeds cloud size {n}"
            )
        idx = knn_indices_all(pts, spec.k)
        normals, unreliable = _batch_normals(pts[idx])
        return NormalField(normals=normals, spec=spec, unreliable=unreliable)

    # ball neighborhoods: variable sizes, group equal sizes for batching
    sq = cdist(pts, pts, "sqeuclidean")
    within = sq <= spec.radius * spec.radius
    fallback = 0
    normals = np.empty((n, 3), dtype=np.float64)
    unreliable = np.zeros(n, dtype=bool)
    counts = within.sum(axis=1)
    small = counts < 3
    fallback = int(small.sum())
    order = np.argsort(sq[small], axis=1, kind="stable") if fallback else None
    for ordinal, i in enumerate(np.nonzero(small)[0]):
        nbr = pts[order[ordinal][:3]]
        normals[i], unreliable[i] = _one_normal(nbr)
    for i in np.nonzero(~small)[0]:
        nbr = pts[within[i]]
        normals[i], unreliable[i] = _one_normal(nbr)
    return NormalField(normals=normals, spec=spec, unreliable=unreliable,
                       fallback_count=fallback)


def _one_normal(neighborhood: np.ndarray) -> tuple[np.ndarray, bool]:
    cov = neighborhood_covariance(neighborhood)
    vals, vecs = np.linalg.eigh(cov)
    spectral = max(abs(vals[0]), abs(vals[2]))
    unreliable = (vals[1] - vals[0]) <= _GAP_TOL * max(spectral, 1e-300)
    return _apply_sign_rule(vecs[:, 0].copy()), bool(unreliable)
