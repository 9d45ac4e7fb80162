"""Synthetic scene generation: pinhole depth rendering and scene assembly.

A scene is one scaled mesh at the origin observed by one camera on a viewing
sphere. Rendering casts one ray per pixel and keeps the nearest ray-triangle
hit, so the cloud is an exact partial view of the mesh with no sensor noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cloud import PointCloud
from .meshes import TriangleMesh
from .se3 import Pose

__all__ = ["CameraIntrinsics", "SceneSample", "render_depth", "make_scene"]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model. Pixel (row v, col u) casts through
    ((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1) in the camera frame."""

    width: int = 160
    height: int = 120
    fx: float = 0.0
    fy: float = 0.0
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int = 160, height: int = 120, hfov_deg: float = 60.0) -> "CameraIntrinsics":
        f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(width, height, f, f, width / 2.0, height / 2.0)


def render_depth(mesh: TriangleMesh, camera: Pose, intrinsics: CameraIntrinsics) -> PointCloud:
    """World-frame point cloud of the mesh as seen by the camera.

    Pixels whose ray misses every triangle are omitted; an empty cloud is a
    valid result. The camera pose's column 2 is the optical axis.
    """
    if not len(mesh.triangles):
        return PointCloud(np.zeros((0, 3)), viewpoint=camera.translation)
    inv = camera.invert()
    verts_cam = np.ascontiguousarray(inv.transform(mesh.vertices))
    depth = _kernels.raycast_cam(
        verts_cam,
        np.ascontiguousarray(mesh.triangles, dtype=np.int32),
        intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy,
        intrinsics.width, intrinsics.height,
    )
    vv, uu = np.nonzero(np.isfinite(depth))
    if not len(vv):
        return PointCloud(np.zeros((0, 3)), viewpoint=camera.translation)
    t_hit = depth[vv, uu]
    dirs = np.column_stack(
        [(uu + 0.5 - intrinsics.cx) / intrinsics.fx,
         (vv + 0.5 - intrinsics.cy) / intrinsics.fy,
         np.ones(len(uu))]
    )
    points_cam = dirs * t_hit[:, None]
    return PointCloud(camera.transform(points_cam), viewpoint=camera.translation)


@dataclass(frozen=True)
class SceneSample:
    """Ground-truth mesh plus one observed view of it.

    `dense_surface` is an area-weighted sampling of the mesh with exact
    outward triangle normals, used as the contact surface by the oracle.
    """

    mesh: TriangleMesh
    camera: Pose
    cloud: PointCloud
    dense_surface: PointCloud

    def __post_init__(self):
        if self.cloud.viewpoint is None or not np.array_equal(
            self.cloud.viewpoint, self.camera.translation
        ):
            raise ValueError("cloud viewpoint must equal the camera position")
        if self.dense_surface.normals is None:
            raise ValueError("dense surface needs normals")


def make_scene(
    mesh: TriangleMesh,
    camera: Pose,
    intrinsics: CameraIntrinsics,
    rng,
    dense_count: int = 20000,
) -> SceneSample:
    from .meshes import sample_surface

    cloud = render_depth(mesh, camera, intrinsics)
    dense = sample_surface(mesh, rng, dense_count)
    return SceneSample(mesh, camera, cloud, dense)
