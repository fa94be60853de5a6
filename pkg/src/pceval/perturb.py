"""Controlled degradation of cloud sets and sweep orchestration.

Perturbations are sized relative to each cloud's diameter so the same
fraction is comparable across shapes: Gaussian coordinate noise with
sigma = noise_frac * diameter, and rigid translations of magnitude
shift_frac * diameter in a uniformly random direction.

``run_sweep`` evaluates a metric grid over (noise level x shift level x
seed) cells, perturbing a copy of the generated set per cell while the
reference set stays untouched.  Per-cloud draws are seeded from
(seed, noise index, shift index, seed index, cloud index, stream), so the
cell values are independent of evaluation order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cloud import CloudSet, PointCloud, diameter, fps_sample, random_sample
from .distances import DistanceSpec
from .errors import InvalidArgumentError, PcevalError
from .metrics import NeighborhoodSpec, VoxelGridSpec, evaluate_sets
from .rng import derive_seed, generator

log = logging.getLogger(__name__)

_NOISE_STREAM = 0
_SHIFT_STREAM = 1
_SAMPLE_STREAM = 2


@dataclass(frozen=True)
class PerturbSpec:
    """One degradation level: noise and shift as fractions of diameter."""

    noise_frac: float = 0.0
    shift_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.noise_frac) and self.noise_frac >= 0):
            raise InvalidArgumentError("noise_frac must be finite and >= 0")
        if not (np.isfinite(self.shift_frac) and self.shift_frac >= 0):
            raise InvalidArgumentError("shift_frac must be finite and >= 0")


@dataclass(frozen=True)
class SweepConfig:
    """Grid of perturbation levels and the metrics to evaluate per cell."""

    noise_grid: tuple[float, ...] = (0.0,)
    shift_grid: tuple[float, ...] = (0.0,)
    metrics: tuple[str, ...] = ("mmd",)
    specs: tuple[DistanceSpec, ...] = (DistanceSpec(),)
    seeds_per_level: int = 1
    seed: int = 0
    sampling: str = "none"  # "none" | "uniform" (farthest-point) | "random"
    sample_size: int | None = None
    nspec: NeighborhoodSpec | None = None
    grid: VoxelGridSpec | None = None
    include_summary: bool = True

    def __post_init__(self):
        for name, grid in (("noise_grid", self.noise_grid), ("shift_grid", self.shift_grid)):
            if len(grid) == 0:
                raise InvalidArgumentError(f"{name} must be non-empty")
            if list(grid) != sorted(grid):
                raise InvalidArgumentError(f"{name} must be sorted ascending")
        if self.sampling not in ("none", "uniform", "random"):
            raise InvalidArgumentError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling != "none" and self.sample_size is None:
            raise InvalidArgumentError("sampling requires a sample_size")
        if self.seeds_per_level < 1:
            raise InvalidArgumentError("seeds_per_level must be >= 1")


def add_noise(cloud: PointCloud, noise_frac: float, seed: int) -> PointCloud:
    """Gaussian coordinate noise with sigma = noise_frac * diameter."""
    if not noise_frac >= 0:
        raise InvalidArgumentError("noise_frac must be >= 0")
    if noise_frac == 0:
        return cloud
    sigma = noise_frac * diameter(cloud)
    if sigma == 0:
        log.warning("cloud %s has zero diameter; noise request ignored", cloud.id)
        return cloud
    rng = generator(seed)
    return cloud.with_points(cloud.points + rng.normal(scale=sigma, size=cloud.points.shape))


def shift(cloud: PointCloud, shift_frac: float, seed: int) -> PointCloud:
    """Rigid translation of magnitude shift_frac * diameter, random direction."""
    if not shift_frac >= 0:
        raise InvalidArgumentError("shift_frac must be >= 0")
    if shift_frac == 0:
        return cloud
    rng = generator(seed)
    direction = rng.normal(size=3)
    norm = np.linalg.norm(direction)
    while norm <= 1e-12:  # essentially unreachable; keeps the draw well-defined
        direction = rng.normal(size=3)
        norm = np.linalg.norm(direction)
    direction /= norm
    return cloud.with_points(cloud.points + direction * (shift_frac * diameter(cloud)))


def perturb_cloud(cloud: PointCloud, spec: PerturbSpec) -> PointCloud:
    """Apply one degradation level (noise then shift) to a single cloud."""
    c = add_noise(cloud, spec.noise_frac, derive_seed(spec.seed, _NOISE_STREAM))
    return shift(c, spec.shift_frac, derive_seed(spec.seed, _SHIFT_STREAM))


def perturb_set(clouds: CloudSet, noise_frac: float, shift_frac: float,
                root_seed: int, noise_idx: int = 0, shift_idx: int = 0,
                seed_idx: int = 0) -> CloudSet:
    """Perturbed copy of a set with per-cloud seeds mixed from the cell path."""
    out = []
    for ci, cloud in enumerate(clouds):
        c = cloud
        if noise_frac > 0:
            c = add_noise(c, noise_frac,
                          derive_seed(root_seed, noise_idx, shift_idx, seed_idx,
                                      ci, _NOISE_STREAM))
        if shift_frac > 0:
            c = shift(c, shift_frac,
                      derive_seed(root_seed, noise_idx, shift_idx, seed_idx,
                                  ci, _SHIFT_STREAM))
        out.append(c)
    return CloudSet(tuple(out), role=clouds.role)


def _subsample_set(clouds: CloudSet, config: SweepConfig) -> CloudSet:
    if config.sampling == "none":
        return clouds
    out = []
    for ci, cloud in enumerate(clouds):
        m = min(config.sample_size, len(cloud))
        if config.sampling == "uniform":
            out.append(fps_sample(cloud, m, start=0))
        else:
            out.append(random_sample(cloud, m,
                                     derive_seed(config.seed, ci, _SAMPLE_STREAM)))
    return CloudSet(tuple(out), role=clouds.role)


@dataclass
class SweepResult:
    """Detail rows (one per grid cell x seed) plus per-level seed means."""

    columns: list[str]
    detail: list[dict]
    summary: list[dict] = field(default_factory=list)


def run_sweep(gen: CloudSet, ref: CloudSet, config: SweepConfig,
              threads: int = 1) -> SweepResult:
    """Evaluate the configured metrics over the perturbation grid.

    Rows appear in deterministic (noise index, shift index, seed index)
    order; each carries the cell parameters plus one column per
    (metric, spec) pair.  A metric failure aborts with the offending cell
    named.
    """
    gen = _subsample_set(gen, config)
    ref = _subsample_set(ref, config)
    value_columns: list[str] = []
    detail: list[dict] = []
    for ni, noise_frac in enumerate(config.noise_grid):
        for si, shift_frac in enumerate(config.shift_grid):
            for ki in range(config.seeds_per_level):
                perturbed = perturb_set(gen, noise_frac, shift_frac,
                                        config.seed, ni, si, ki)
                try:
                    reports = evaluate_sets(
                        perturbed, ref, metrics=config.metrics,
                        specs=config.specs, nspec=config.nspec,
                        grid=config.grid, threads=threads,
                    )
                except PcevalError as exc:
                    raise type(exc)(
                        f"sweep cell (noise={noise_frac}, shift={shift_frac}, "
                        f"seed_index={ki}) failed: {exc}"
                    ) from exc
                row = {"noise_frac": noise_frac, "shift_frac": shift_frac,
                       "seed": ki}
                for rep in reports:
                    row[rep.label()] = rep.value
                if not value_columns:
                    value_columns = [rep.label() for rep in reports]
                detail.append(row)
    columns = ["noise_frac", "shift_frac", "seed"] + value_columns
    summary: list[dict] = []
    if config.include_summary and config.seeds_per_level > 1:
        for ni, noise_frac in enumerate(config.noise_grid):
            for si, shift_frac in enumerate(config.shift_grid):
                rows = [r for r in detail
                        if r["noise_frac"] == noise_frac and r["shift_frac"] == shift_frac]
                mean_row = {"noise_frac": noise_frac, "shift_frac": shift_frac,
                            "seed": "mean"}
                for col in value_columns:
                    mean_row[col] = float(np.mean([r[col] for r in rows]))
                summary.append(mean_row)
    return SweepResult(columns=columns, detail=detail, summary=summary)
