"""Set-level generative-evaluation metrics.

All matching metrics (minimum matching distance, coverage, 1-NN accuracy,
surface normal concordance) consume pairwise distance tables with rows
indexed by generated clouds and columns by reference clouds.  Tables are
computed once per (set pair, distance spec) and shared across metrics; the
reductions iterate in fixed index order so results do not depend on the
worker-thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .cloud import CloudSet, PointCloud, center
from .distances import DistanceSpec, evaluate, resolve_emd_solver
from .errors import InvalidArgumentError
from .neighbors import NeighborhoodSpec
from .normals import estimate_normals

DEFAULT_JSD_RESOLUTION = 28


@dataclass(frozen=True)
class VoxelGridSpec:
    """Axis-aligned cubic grid used for occupancy histograms."""

    resolution: int
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if self.resolution < 2:
            raise InvalidArgumentError("voxel resolution must be at least 2")
        if not all(h > l for l, h in zip(self.lo, self.hi)):
            raise InvalidArgumentError("voxel bounds must have positive volume")

    def label(self) -> str:
        return f"voxel{self.resolution}"


def default_voxel_grid(*sets: CloudSet, resolution: int = DEFAULT_JSD_RESOLUTION) -> VoxelGridSpec:
    """Tight bounding cube of all given sets, expanded by 1e-6 relative."""
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for s in sets:
        for c in s:
            lo = np.minimum(lo, c.points.min(axis=0))
            hi = np.maximum(hi, c.points.max(axis=0))
    mid = (lo + hi) / 2.0
    half = float((hi - lo).max()) / 2.0
    half = max(half, 1e-12) * (1.0 + 1e-6)
    return VoxelGridSpec(
        resolution=int(resolution),
        lo=tuple(float(v) for v in mid - half),
        hi=tuple(float(v) for v in mid + half),
    )


@dataclass
class MetricReport:
    """One metric value plus everything needed to reproduce it."""

    metric: str
    value: float
    spec: DistanceSpec | None = None
    neighborhood: NeighborhoodSpec | None = None
    grid: VoxelGridSpec | None = None
    n_generated: int = 0
    n_reference: int = 0
    scaling: float = 1.0

    def label(self) -> str:
        if self.spec is not None:
            return f"{self.metric}-{self.spec.label()}"
        return self.metric

    def scaled_value(self) -> float:
        return self.value * self.scaling

    def to_dict(self) -> dict:
        d = {
            "metric": self.metric,
            "value": self.value,
            "scaling": self.scaling,
            "scaled_value": self.scaled_value(),
            "n_generated": self.n_generated,
            "n_reference": self.n_reference,
        }
        if self.spec is not None:
            d["measure"] = self.spec.measure
            d["aligned"] = self.spec.aligned
            if self.spec.measure == "dcd":
                d["alpha"] = self.spec.alpha
            if self.spec.measure == "emd":
                d["solver"] = self.spec.solver
                d["epsilon"] = self.spec.epsilon
                d["normalize"] = self.spec.normalize
        if self.neighborhood is not None:
            d["neighborhood"] = self.neighborhood.label()
        if self.grid is not None:
            d["grid"] = {"resolution": self.grid.resolution,
                         "lo": list(self.grid.lo), "hi": list(self.grid.hi)}
        return d


class DistanceTableCache:
    """Caches pairwise tables keyed by (set contents, set contents, spec)."""

    def __init__(self, threads: int = 1):
        self.threads = threads
        self._tables: dict = {}
        self._centered: dict = {}

    def _centered_set(self, s: CloudSet) -> CloudSet:
        key = id(s)
        if key not in self._centered:
            self._centered[key] = CloudSet(tuple(center(c) for c in s), role=s.role)
        return self._centered[key]

    def table(self, gen: CloudSet, ref: CloudSet, spec: DistanceSpec) -> np.ndarray:
        key = (gen.content_key(), ref.content_key(), spec.cache_key())
        if key not in self._tables:
            self._tables[key] = pairwise_table(
                gen, ref, spec, threads=self.threads,
                symmetric=gen.content_key() == ref.content_key(),
                centered_lookup=self._centered_set,
            )
        return self._tables[key]


def _resolve_table_spec(gen: CloudSet, ref: CloudSet, spec: DistanceSpec) -> DistanceSpec:
    if spec.measure != "emd" or spec.solver != "auto":
        return spec
    from dataclasses import replace

    biggest = max(max(len(c) for c in gen), max(len(c) for c in ref))
    return replace(spec, solver=resolve_emd_solver("auto", biggest))


def pairwise_table(gen: CloudSet, ref: CloudSet, spec: DistanceSpec,
                   threads: int = 1, symmetric: bool = False,
                   centered_lookup=None) -> np.ndarray:
    """Distance of every (generated, reference) cloud pair under ``spec``.

    ``symmetric=True`` (same set on both axes with a symmetric measure)
    computes the upper triangle only and mirrors it.  Alignment centers
    each cloud once per set, not once per pair.
    """
    spec = _resolve_table_spec(gen, ref, spec)
    if spec.aligned:
        if centered_lookup is not None:
            gen = centered_lookup(gen)
            ref = centered_lookup(ref) if ref is not gen else gen
        else:
            gen = CloudSet(tuple(center(c) for c in gen), role=gen.role)
            ref = CloudSet(tuple(center(c) for c in ref), role=ref.role)
    raw_spec = DistanceSpec(measure=spec.measure, aligned=False, alpha=spec.alpha,
                            solver=spec.solver, epsilon=spec.epsilon,
                            normalize=spec.normalize)
    ng, nr = len(gen), len(ref)
    out = np.empty((ng, nr), dtype=np.float64)
    if symmetric and ng == nr:
        cells = [(i, j) for i in range(ng) for j in range(i, nr)]
    else:
        symmetric = False
        cells = [(i, j) for i in range(ng) for j in range(nr)]

    def run(cell):
        i, j = cell
        out[i, j] = evaluate(gen[i], ref[j], raw_spec)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, cells))
    else:
        for cell in cells:
            run(cell)
    if symmetric:
        iu = np.triu_indices(ng)
        out[(iu[1], iu[0])] = out[iu]
    return out


def mmd(ref: CloudSet, gen: CloudSet, spec: DistanceSpec,
        table: np.ndarray | None = None, threads: int = 1) -> float:
    """Mean over references of the distance to the closest generated cloud."""
    if table is None:
        table = pairwise_table(gen, ref, spec, threads=threads)
    return float(table.min(axis=0).mean())


def cov(ref: CloudSet, gen: CloudSet, spec: DistanceSpec,
        table: np.ndarray | None = None, threads: int = 1) -> float:
    """Fraction of references that are the best match of some generated cloud."""
    if table is None:
        table = pairwise_table(gen, ref, spec, threads=threads)
    matched = np.unique(table.argmin(axis=1))  # argmin: lowest index on ties
    return float(len(matched) / table.shape[1])


def best_match(X: PointCloud, ref: CloudSet, spec: DistanceSpec,
               row: np.ndarray | None = None) -> int:
    """Index of the closest reference under the spec, lowest index on ties."""
    if row is None:
        from .distances import aligned_distance

        row = np.array([aligned_distance(X, Y, spec) for Y in ref])
    return int(np.argmin(row))


def one_nna(gen: CloudSet, ref: CloudSet, spec: DistanceSpec,
            cache: DistanceTableCache | None = None, threads: int = 1) -> float:
    """Leave-one-out 1-NN classification accuracy over the union of sets.

    0.5 means the sets are indistinguishable.  Distance ties resolve to the
    reference block first, then the lower index; a sample's own entry is
    excluded.
    """
    if len(gen) != len(ref):
        raise InvalidArgumentError("1-NN accuracy requires equal-size sets")
    if len(gen) < 2:
        raise InvalidArgumentError("1-NN accuracy requires at least 2 clouds per set")
    if cache is None:
        cache = DistanceTableCache(threads=threads)
    d_gr = cache.table(gen, ref, spec)
    d_gg = cache.table(gen, gen, spec)
    d_rr = cache.table(ref, ref, spec)
    nr = len(ref)
    ng = len(gen)
    m = np.empty((nr + ng, nr + ng), dtype=np.float64)
    m[:nr, :nr] = d_rr
    m[:nr, nr:] = d_gr.T
    m[nr:, :nr] = d_gr
    m[nr:, nr:] = d_gg
    np.fill_diagonal(m, np.inf)
    neighbor = m.argmin(axis=1)  # first occurrence: reference block, then index
    same = (neighbor < nr) == (np.arange(nr + ng) < nr)
    return float(same.mean())


def _occupancy(clouds: CloudSet, grid: VoxelGridSpec) -> np.ndarray:
    r = grid.resolution
    lo = np.asarray(grid.lo)
    size = (np.asarray(grid.hi) - lo) / r
    counts = np.zeros(r * r * r, dtype=np.int64)
    for c in clouds:
        ijk = np.floor((c.points - lo) / size).astype(np.int64)
        np.clip(ijk, 0, r - 1, out=ijk)  # out-of-bounds points clamp to the edge voxel
        flat = (ijk[:, 0] * r + ijk[:, 1]) * r + ijk[:, 2]
        counts += np.bincount(flat, minlength=r * r * r)
    return counts


def jsd(gen: CloudSet, ref: CloudSet, grid: VoxelGridSpec | None = None) -> float:
    """Jensen-Shannon divergence between voxel-occupancy marginals (nats)."""
    if grid is None:
        grid = default_voxel_grid(gen, ref)
    cg = _occupancy(gen, grid)
    cr = _occupancy(ref, grid)
    pg = cg / cg.sum()
    pr = cr / cr.sum()
    m = (pg + pr) / 2.0
    value = 0.5 * _kl(pr, m) + 0.5 * _kl(pg, m)
    return float(max(value, 0.0))


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def snc(ref: CloudSet, gen: CloudSet, spec: DistanceSpec,
        nspec: NeighborhoodSpec | None = None,
        cache: DistanceTableCache | None = None, threads: int = 1,
        normals_cache: dict | None = None) -> float:
    """Surface normal concordance between generated clouds and best matches.

    For every generated cloud, find its closest reference under ``spec``;
    then for every point, the absolute cosine between its normal and the
    normal of the Euclidean-nearest point of that reference.  Point averages
    are averaged per cloud, then over clouds.  Normals are estimated on the
    raw (uncentered) clouds; translation does not change them.
    """
    if nspec is None:
        nspec = NeighborhoodSpec("knn", k=20)
    if cache is None:
        cache = DistanceTableCache(threads=threads)
    table = cache.table(gen, ref, spec)
    if normals_cache is None:
        normals_cache = {}

    def normals_for(cloud: PointCloud) -> np.ndarray:
        key = (id(cloud), nspec)
        if key not in normals_cache:
            normals_cache[key] = estimate_normals(cloud, nspec).normals
        return normals_cache[key]

    per_cloud = np.empty(len(gen), dtype=np.float64)
    for gi, X in enumerate(gen):
        mi = int(np.argmin(table[gi]))
        M = ref[mi]
        xs = center(X).points if spec.aligned else X.points
        ys = center(M).points if spec.aligned else M.points
        nn = cdist(xs, ys, "sqeuclidean").argmin(axis=1)
        nx = normals_for(X)
        ny = normals_for(M)[nn]
        per_cloud[gi] = np.abs(np.einsum("ij,ij->i", nx, ny)).mean()
    return float(per_cloud.mean())


METRIC_NAMES = ("mmd", "cov", "1nna", "snc", "jsd")
TABLE_SCALING = {("mmd", "dcd"): 10.0, ("mmd", "emd"): 1000.0,
                 ("cov", None): 100.0, ("1nna", None): 100.0, ("snc", None): 100.0}


def table_scaling_for(metric: str, measure: str | None) -> float:
    """Presentation scaling conventions: matching-distance means are scaled
    up to readable magnitudes, fraction metrics become percentages."""
    if (metric, measure) in TABLE_SCALING:
        return TABLE_SCALING[(metric, measure)]
    if (metric, None) in TABLE_SCALING:
        return TABLE_SCALING[(metric, None)]
    return 1.0


def evaluate_sets(gen: CloudSet, ref: CloudSet,
                  metrics: tuple[str, ...] = ("mmd", "cov", "1nna", "snc"),
                  specs: tuple[DistanceSpec, ...] = (DistanceSpec(),),
                  nspec: NeighborhoodSpec | None = None,
                  grid: VoxelGridSpec | None = None,
                  jsd_resolution: int = DEFAULT_JSD_RESOLUTION,
                  jsd_aligned: bool | None = None,
                  threads: int = 1,
                  apply_table_scaling: bool = False) -> list[MetricReport]:
    """Evaluate every requested (metric x distance spec) cell.

    ``jsd`` ignores distance specs; with ``jsd_aligned`` (defaulting to any
    spec's alignment flag) every cloud is centered before occupancy
    counting, making the marginal histograms shift-invariant.
    """
    for name in metrics:
        if name not in METRIC_NAMES:
            raise InvalidArgumentError(f"unknown metric {name!r}")
    cache = DistanceTableCache(threads=threads)
    normals_cache: dict = {}
    if nspec is None:
        nspec = NeighborhoodSpec("knn", k=20)
    reports: list[MetricReport] = []
    sizes = {"n_generated": len(gen), "n_reference": len(ref)}
    for name in metrics:
        if name == "jsd":
            aligned = (jsd_aligned if jsd_aligned is not None
                       else any(s.aligned for s in specs))
            g, r = gen, ref
            if aligned:
                g = cache._centered_set(gen)
                r = cache._centered_set(ref)
            use_grid = grid if grid is not None else default_voxel_grid(
                g, r, resolution=jsd_resolution)
            value = jsd(g, r, use_grid)
            reports.append(MetricReport(metric="jsd", value=value, grid=use_grid,
                                        **sizes))
            continue
        for spec in specs:
            if name == "mmd":
                value = mmd(ref, gen, spec, table=cache.table(gen, ref, spec))
            elif name == "cov":
                value = cov(ref, gen, spec, table=cache.table(gen, ref, spec))
            elif name == "1nna":
                value = one_nna(gen, ref, spec, cache=cache)
            else:
                value = snc(ref, gen, spec, nspec=nspec, cache=cache,
                            normals_cache=normals_cache)
            report = MetricReport(
                metric=name, value=value, spec=spec,
                neighborhood=nspec if name == "snc" else None, **sizes,
            )
            if apply_table_scaling:
                report.scaling = table_scaling_for(name, spec.measure)
            reports.append(report)
    return reports
