"""graspfind: two-stage 6-DOF grasp pose detection for parallel-jaw grippers.

Pipeline: sample points from a partial-view cloud, score a fixed grid of 196
hand orientations per point with a small CNN over cropped orthographic height
maps, correct and rank the surviving candidates with a grasp classifier over
4-channel closing-region descriptors. Ground truth comes from an analytic
antipodal oracle run against dense mesh surfaces.
"""

from ._kernels import BACKEND as kernel_backend
from .cloud import PointCloud, SpatialIndex, estimate_normals
from .hand import GraspHypothesis, HandGeometry, OrientationGrid, build_orientation_grid
from .meshes import TriangleMesh
from .oracle import OracleConfig, grasp_label, label_vector, robust_label
from .rng import Rng
from .se3 import Pose

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "PointCloud",
    "SpatialIndex",
    "estimate_normals",
    "GraspHypothesis",
    "HandGeometry",
    "OrientationGrid",
    "build_orientation_grid",
    "TriangleMesh",
    "OracleConfig",
    "grasp_label",
    "label_vector",
    "robust_label",
    "Rng",
    "Pose",
    "__version__",
]
