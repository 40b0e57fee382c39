"""windnorm: globally consistent outward normals for unoriented point clouds.

Orientation is recovered by maximizing the boundary energy of the
generalized winding-number field over per-point spherical normal angles,
with probe pairs drawn from each point's Voronoi cell vertices.
"""

import os as _os

# Cap BLAS/OpenMP worker pools before numpy initializes its backends.
_threads = _os.environ.get("WINDNORM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .core import (
    CloudTransform,
    NormalField,
    PointCloud,
    angles_to_normal,
    init_random_normals,
    merge_duplicates,
    normal_jacobian,
    normalize_cloud,
)
from .energy import EnergyReport, EnergyState, boundary_energy, energy_gradient, penalty_g
from .errors import WindnormError
from .gwn import (
    Diagnostics,
    estimate_areas,
    kernel_gradient,
    poisson_kernel,
    winding_gradient,
    winding_number,
    winding_numbers,
)
from .metrics import AngleStats, add_noise, angle_stats, chamfer_points, inside_out_count
from .optim import OptimConfig, OrientationResult, orient
from .shapes import ShapeSpec, generate_shape, sphere_classifier, torus_classifier
from .voronoi import SamplePair, SampleSet, VoronoiDiagram, build_diagram, select_all_samples

__version__ = "0.1.0"

__all__ = [
    "AngleStats",
    "CloudTransform",
    "Diagnostics",
    "EnergyReport",
    "EnergyState",
    "NormalField",
    "OptimConfig",
    "OrientationResult",
    "PointCloud",
    "SamplePair",
    "SampleSet",
    "ShapeSpec",
    "VoronoiDiagram",
    "WindnormError",
    "add_noise",
    "angle_stats",
    "angles_to_normal",
    "boundary_energy",
    "build_diagram",
    "chamfer_points",
    "energy_gradient",
    "estimate_areas",
    "generate_shape",
    "init_random_normals",
    "inside_out_count",
    "kernel_gradient",
    "merge_duplicates",
    "normal_jacobian",
    "normalize_cloud",
    "orient",
    "penalty_g",
    "poisson_kernel",
    "select_all_samples",
    "sphere_classifier",
    "torus_classifier",
    "winding_gradient",
    "winding_number",
    "winding_numbers",
]
