"""Image encoders: orthographic height-map views and grasp descriptors.

The proposal scorer sees three fixed-size crops, one per orthographic view of
the cloud around a point of interest. The grasp classifier sees a 4-channel
image of the points inside the closing region, projected along the
hand-height axis: max-binned height plus the per-cell average surface normal.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .cloud import PointCloud
from .hand import HandGeometry
from .se3 import Pose, look_at_rotation

__all__ = [
    "HeightMap",
    "GraspDescriptor",
    "orthographic_views",
    "proposal_image",
    "grasp_descriptor",
    "camera_frame",
    "write_pgm",
    "write_ppm",
]

# The three views project along camera x, y, z; each view's in-plane axes
# (col_axis, row_axis) are the remaining two in cyclic order.
VIEW_AXES = ((1, 2, 0), (2, 0, 1), (0, 1, 2))  # (col, row, height)


@dataclass(frozen=True)
class HeightMap:
    """One orthographic view. Values in [0, 1]; 0 doubles as the empty cell.

    `values[r, c]` is the max over points binned to that cell of the height
    toward the view's minus side: height = (hi - p[height_axis]) / cube_size
    where hi is the cube face at the + end of the height axis. The viewer
    therefore sits at the minus side of the height axis, matching what a
    camera looking along +z sees for the z view.
    """

    values: np.ndarray
    col_axis: int
    row_axis: int
    height_axis: int
    origin: np.ndarray  # cube corner (all-min)
    cube_size: float
    resolution: float

    def pixel_of(self, point: np.ndarray) -> tuple[int, int]:
        """(row, col) cell of a point, which may lie outside the map."""
        p = np.asarray(point, dtype=np.float64)
        col = int(np.floor((p[self.col_axis] - self.origin[self.col_axis]) / self.resolution))
        row = int(np.floor((p[self.row_axis] - self.origin[self.row_axis]) / self.resolution))
        return row, col


def camera_frame(cloud: PointCloud, center: np.ndarray | None = None) -> Pose:
    """Deterministic working frame for a sensor cloud.

    Origin at the viewpoint, optical axis toward `center` (cloud centroid by
    default), up vector per :func:`look_at_rotation`. The orientation grid and
    the orthographic views both live in this frame.
    """
    if cloud.viewpoint is None:
        raise ValueError("camera_frame needs a cloud with a viewpoint")
    target = cloud.centroid() if center is None else np.asarray(center, dtype=np.float64)
    forward = target - cloud.viewpoint
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("viewpoint coincides with the view center")
    return Pose(look_at_rotation(forward / norm), cloud.viewpoint)


def orthographic_views(
    points: np.ndarray,
    center: np.ndarray,
    cube_size: float,
    resolution: float,
) -> list[HeightMap]:
    """Three axis-aligned max-height projections of points inside a cube.

    `points` must already be expressed in the frame whose axes define the
    views (the camera frame in the pipeline). Heights are normalized by
    `cube_size`, so all values land in [0, 1].
    """
    if cube_size <= 0 or resolution <= 0:
        raise ValueError("cube_size and resolution must be positive")
    center = np.asarray(center, dtype=np.float64)
    half = cube_size / 2.0
    origin = center - half
    n_cells = max(1, int(np.ceil(cube_size / resolution - 1e-9)))
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts):
        inside = (np.abs(pts - center) <= half).all(axis=1)
        pts = pts[inside]
    views = []
    for col_axis, row_axis, height_axis in VIEW_AXES:
        values = np.zeros((n_cells, n_cells), dtype=np.float64)
        if len(pts):
            col = ((pts[:, col_axis] - origin[col_axis]) / resolution).astype(np.int64)
            row = ((pts[:, row_axis] - origin[row_axis]) / resolution).astype(np.int64)
            np.clip(col, 0, n_cells - 1, out=col)
            np.clip(row, 0, n_cells - 1, out=row)
            height = ((center[height_axis] + half) - pts[:, height_axis]) / cube_size
            np.maximum.at(values, (row, col), height)
        views.append(
            HeightMap(values, col_axis, row_axis, height_axis, origin, cube_size, resolution)
        )
    return views


def proposal_image(views: list[HeightMap], sample: np.ndarray, crop: int = 60) -> np.ndarray:
    """(3, crop, crop) stack of per-view crops centered on the sample's pixel.

    Regions of a crop outside its view are padded with empty cells, so a
    sample near the border still yields a full-size image.
    """
    image = np.zeros((len(views), crop, crop), dtype=np.float64)
    lo = crop // 2
    for ch, view in enumerate(views):
        row, col = view.pixel_of(sample)
        h, w = view.values.shape
        r0, c0 = row - lo, col - lo
        src_r0, src_c0 = max(r0, 0), max(c0, 0)
        src_r1, src_c1 = min(r0 + crop, h), min(c0 + crop, w)
        if src_r0 >= src_r1 or src_c0 >= src_c1:
            continue
        image[ch, src_r0 - r0:src_r1 - r0, src_c0 - c0:src_c1 - c0] = view.values[
            src_r0:src_r1, src_c0:src_c1
        ]
    return image


@dataclass(frozen=True)
class GraspDescriptor:
    """4 x size x size closing-region image; `empty` when no points fell inside."""

    image: np.ndarray
    empty: bool


def grasp_descriptor(
    cloud: PointCloud, pose: Pose, hand: HandGeometry, size: int = 60
) -> GraspDescriptor:
    """Classifier input for one grasp pose.

    Closing-region points are rotated into the hand frame and projected along
    the hand-height axis onto the (closing x approach) plane. Channel 0 is
    the max-binned height in [0, 1]; channels 1..3 hold the per-cell average
    unit normal mapped from [-1, 1] to [0, 1]. Background cells are 0 in
    channel 0 and 0.5 in the normal channels.
    """
    if cloud.normals is None:
        raise ValueError("grasp_descriptor needs cloud normals")
    a2 = hand.max_aperture / 2.0
    h2 = hand.hand_height / 2.0
    l2 = hand.finger_length / 2.0
    local = (cloud.points - pose.translation) @ pose.rotation
    inside = (
        (np.abs(local[:, 0]) <= a2)
        & (np.abs(local[:, 1]) <= h2)
        & (np.abs(local[:, 2]) <= l2)
    )
    if not inside.any():
        background = np.zeros((4, size, size), dtype=np.float64)
        background[1:] = 0.5
        return GraspDescriptor(background, empty=True)
    local = local[inside]
    normals = cloud.normals[inside] @ pose.rotation
    image = _kernels.descriptor_fill(
        np.ascontiguousarray(local[:, 0]),
        np.ascontiguousarray(local[:, 1]),
        np.ascontiguousarray(local[:, 2]),
        np.ascontiguousarray(normals[:, 0]),
        np.ascontiguousarray(normals[:, 1]),
        np.ascontiguousarray(normals[:, 2]),
        a2, h2, l2, size,
    )
    return GraspDescriptor(image, empty=False)


def write_pgm(path, image: np.ndarray) -> None:
    """16-bit binary PGM of a single [0, 1] channel, row-major."""
    data = np.clip(np.asarray(image), 0.0, 1.0)
    scaled = np.round(data * 65535.0).astype(">u2")
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n65535\n".encode()
    Path(path).write_bytes(header + scaled.tobytes())


def write_ppm(path, channels: np.ndarray) -> None:
    """16-bit binary PPM of a (3, H, W) [0, 1] image, row-major."""
    data = np.clip(np.asarray(channels), 0.0, 1.0)
    if data.shape[0] != 3:
        raise ValueError("write_ppm expects a (3, H, W) image")
    interleaved = np.moveaxis(np.round(data * 65535.0).astype(">u2"), 0, -1)
    header = f"P6\n{data.shape[2]} {data.shape[1]}\n65535\n".encode()
    Path(path).write_bytes(header + interleaved.tobytes())
