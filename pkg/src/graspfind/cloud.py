"""Point clouds, spatial indexing, and surface-normal estimation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .se3 import Pose

__all__ = ["PointCloud", "SpatialIndex", "DegenerateNeighborhood", "estimate_normals"]

UNIT_NORMAL_TOL = 1e-6


class DegenerateNeighborhood(Exception):
    """Raised when a normal-estimation neighborhood is too degenerate to use."""


class SpatialIndex:
    """Balanced k-d structure over a fixed point set.

    Thin wrapper over scipy's cKDTree; query results match a brute-force
    scan as a set.
    """

    def __init__(self, points: np.ndarray):
        self._points = np.ascontiguousarray(points, dtype=np.float64)
        self._tree = cKDTree(self._points)

    def __len__(self) -> int:
        return len(self._points)

    def radius(self, center, r: float) -> np.ndarray:
        """Indices of points with ||p - center|| <= r, ascending."""
        idx = self._tree.query_ball_point(np.asarray(center, dtype=np.float64), r)
        return np.array(sorted(idx), dtype=np.intp)

    def knn(self, center, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(distances, indices) of the k nearest points to `center`."""
        k = min(k, len(self._points))
        d, i = self._tree.query(np.asarray(center, dtype=np.float64), k=k)
        return np.atleast_1d(d), np.atleast_1d(i).astype(np.intp)

    def knn_batch(self, centers: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        k = min(k, len(self._points))
        d, i = self._tree.query(np.asarray(centers, dtype=np.float64), k=k)
        return d, i.astype(np.intp)


@dataclass(frozen=True)
class PointCloud:
    """Observed points, optional unit normals, optional sensor origin.

    When both normals and a viewpoint are present, every normal must face the
    viewpoint (n . (viewpoint - p) >= 0). Mesh-sampled surfaces with outward
    normals carry no viewpoint.
    """

    points: np.ndarray
    normals: np.ndarray | None = None
    viewpoint: np.ndarray | None = None

    def __post_init__(self):
        p = np.ascontiguousarray(self.points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", p)
        if self.normals is not None:
            n = np.ascontiguousarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if n.shape != p.shape:
                raise ValueError("normals shape must match points")
            lengths = np.linalg.norm(n, axis=1)
            if len(n) and np.abs(lengths - 1.0).max() >= UNIT_NORMAL_TOL:
                raise ValueError("normals must be unit length within 1e-6")
            object.__setattr__(self, "normals", n)
        if self.viewpoint is not None:
            v = np.ascontiguousarray(self.viewpoint, dtype=np.float64).reshape(3)
            object.__setattr__(self, "viewpoint", v)
            if self.normals is not None and len(p):
                facing = np.einsum("ij,ij->i", self.normals, v[None, :] - p)
                if facing.min() < -1e-9:
                    raise ValueError("normals must face the viewpoint")

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def index(self) -> SpatialIndex:
        return SpatialIndex(self.points)

    def transformed(self, pose: Pose) -> "PointCloud":
        """Rigidly move the cloud (points, normals, and viewpoint)."""
        return PointCloud(
            pose.transform(self.points),
            None if self.normals is None else pose.rotate(self.normals),
            None if self.viewpoint is None else pose.transform(self.viewpoint),
        )

    def centroid(self) -> np.ndarray:
        if not len(self.points):
            raise ValueError("empty cloud has no centroid")
        return self.points.mean(axis=0)


def estimate_normals(
    cloud: PointCloud,
    k: int = 30,
    radius: float = 0.01,
    return_flags: bool = False,
):
    """PCA normals oriented toward the cloud's viewpoint.

    The neighborhood of each point is its `k` nearest neighbors or all points
    within `radius`, whichever set is larger. The normal is the eigenvector
    of the neighborhood covariance with the smallest eigenvalue, sign-flipped
    to face the viewpoint. Collinear neighborhoods (covariance rank < 2) get
    the viewpoint direction instead and are flagged.

    Returns the cloud with normals attached; with ``return_flags=True`` also
    returns a boolean mask of the degenerate points.
    """
    if cloud.viewpoint is None:
        raise ValueError("estimate_normals needs a cloud with a viewpoint")
    pts = cloud.points
    if len(pts) < 1:
        raise ValueError("empty cloud")
    k = min(k, len(pts))
    index = cloud.index

    dists, idx = index.knn_batch(pts, k)
    dists = dists.reshape(len(pts), k)
    idx = idx.reshape(len(pts), k)

    nbr = pts[idx]
    centered = nbr - nbr.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    normals, degenerate = _normals_from_cov(cov, k)

    # Wherever the radius ball holds more than k points, redo with the ball.
    for i in np.nonzero(dists[:, -1] < radius)[0]:
        ball = index.radius(pts[i], radius)
        if len(ball) <= k:
            continue
        c = pts[ball] - pts[ball].mean(axis=0)
        n, bad = _normals_from_cov((c.T @ c)[None], len(ball))
        normals[i], degenerate[i] = n[0], bad[0]

    to_view = cloud.viewpoint[None, :] - pts
    flip = np.einsum("ij,ij->i", normals, to_view) < 0
    normals[flip] = -normals[flip]
    if degenerate.any():
        d = to_view[degenerate]
        lengths = np.linalg.norm(d, axis=1, keepdims=True)
        normals[degenerate] = np.where(lengths > 1e-12, d / np.maximum(lengths, 1e-300), [0.0, 0.0, 1.0])

    result = PointCloud(pts, normals, cloud.viewpoint)
    if return_flags:
        return result, degenerate
    return result


def _normals_from_cov(cov: np.ndarray, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    evals, evecs = np.linalg.eigh(cov)
    normals = np.ascontiguousarray(evecs[:, :, 0])
    scale = np.maximum(evals[:, 2], 1e-300)
    degenerate = (evals[:, 1] <= 1e-9 * scale) | (evals[:, 2] <= 0.0)
    if n_points < 3:
        degenerate[:] = True
    return normals, degenerate
