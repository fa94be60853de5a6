"""Evaluation toolkit for sets of generated 3D point clouds.

Core pieces: barycenter-aligned pairwise distances (chamfer, earth mover's,
density-aware chamfer), set-level metrics (MMD, COV, 1-NN accuracy, JSD,
surface normal concordance), PCA plane-fit normals, and a perturbation
harness for noise/shift robustness studies.
"""

__version__ = "0.1.0"

from .cloud import (CloudSet, PointCloud, barycenter, center, diameter,
                    fps_sample, random_sample)
from .distances import (DistanceSpec, aligned_distance, chamfer, dcd, emd)
from .errors import (DataIOError, DegenerateNeighborhoodError,
                     InvalidArgumentError, ParseError, PcevalError,
                     SolverFailureError)
from .io_formats import (load_cloud, load_normals, load_set, save_cloud,
                         save_manifest, save_normals, write_report,
                         write_sweep)
from .metrics import (DistanceTableCache, MetricReport, VoxelGridSpec,
                      best_match, cov, default_voxel_grid, evaluate_sets,
                      jsd, mmd, one_nna, pairwise_table, snc)
from .neighbors import NeighborhoodSpec, ball, knn, nearest
from .normals import (NormalField, estimate_normals, neighborhood_covariance,
                      smallest_eigenvector)
from .perturb import (PerturbSpec, SweepConfig, SweepResult, add_noise,
                      perturb_cloud, perturb_set, run_sweep, shift)
from .synthetic import (box_cloud, mixed_set, plane_cloud, shape_cloud,
                        single_kind_set, sphere_cloud)

__all__ = [name for name in dir() if not name.startswith("_")]
