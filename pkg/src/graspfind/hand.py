"""Parallel-jaw hand geometry, the fixed orientation grid, and pose corrections.

Hand frame convention (rotation columns of a grasp pose):

* column 0: closing direction (fingers travel along +-x),
* column 1: hand-height axis,
* column 2: approach direction (the hand advances along +z),

with the origin at the centroid of the closing region, the box of extent
max_aperture x hand_height x finger_length between the fingers. Finger boxes
sit at +-aperture/2 along the closing axis; the base plate sits behind the
finger roots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .cloud import PointCloud
from .se3 import Pose

__all__ = [
    "HandGeometry",
    "OrientationGrid",
    "GraspHypothesis",
    "OrientedBox",
    "build_orientation_grid",
    "grasp_pose",
    "hand_occupancy",
    "in_collision",
    "closing_region_points",
    "push_forward",
    "center_laterally",
]

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class HandGeometry:
    """Robotiq 2F-85-like defaults; all lengths in meters."""

    finger_length: float = 0.04
    finger_thickness: float = 0.01
    hand_height: float = 0.02
    max_aperture: float = 0.085
    base_depth: float = 0.02

    def __post_init__(self):
        for name in ("finger_length", "finger_thickness", "hand_height", "max_aperture", "base_depth"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_aperture <= 2 * self.finger_thickness:
            raise ValueError("max_aperture must exceed twice the finger thickness")


@dataclass(frozen=True)
class OrientationGrid:
    """Fixed set of hand orientations: approach axes on a spherical cap around
    the camera axis times a few rolls about each axis.

    Index i decodes as (axis i // n_rolls, roll i % n_rolls). A trained
    scoring network is only valid together with its grid.
    """

    axes: np.ndarray
    rolls: np.ndarray
    camera_axis: np.ndarray
    cap_half_angle_deg: float

    def __post_init__(self):
        object.__setattr__(self, "axes", np.ascontiguousarray(self.axes, dtype=np.float64))
        object.__setattr__(self, "rolls", np.ascontiguousarray(self.rolls, dtype=np.float64))
        object.__setattr__(self, "camera_axis", np.ascontiguousarray(self.camera_axis, dtype=np.float64))

    @property
    def n_axes(self) -> int:
        return len(self.axes)

    @property
    def n_rolls(self) -> int:
        return len(self.rolls)

    @property
    def m(self) -> int:
        return self.n_axes * self.n_rolls

    def decode(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.m:
            raise IndexError(f"orientation index {index} out of range [0, {self.m})")
        return index // self.n_rolls, index % self.n_rolls

    def encode(self, axis_index: int, roll_index: int) -> int:
        return axis_index * self.n_rolls + roll_index

    def rotation(self, index: int) -> np.ndarray:
        axis_index, roll_index = self.decode(index)
        return _orientation_rotation(self.axes[axis_index], float(self.rolls[roll_index]))

    def rotations(self) -> np.ndarray:
        """All m rotation matrices, shape (m, 3, 3), in index order."""
        out = np.empty((self.m, 3, 3))
        for i in range(self.m):
            out[i] = self.rotation(i)
        return out

    def to_dict(self) -> dict:
        return {
            "n_axes": self.n_axes,
            "n_rolls": self.n_rolls,
            "camera_axis": [float(v) for v in self.camera_axis],
            "cap_half_angle_deg": float(self.cap_half_angle_deg),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OrientationGrid":
        return build_orientation_grid(
            camera_axis=np.array(d["camera_axis"], dtype=np.float64),
            n_axes=int(d["n_axes"]),
            n_rolls=int(d["n_rolls"]),
            cap_half_angle_deg=float(d["cap_half_angle_deg"]),
        )


def _rotation_to(target: np.ndarray) -> np.ndarray:
    """Minimal rotation taking +z to the unit vector `target`."""
    z = np.array([0.0, 0.0, 1.0])
    c = float(z @ target)
    if c > 1.0 - 1e-12:
        return np.eye(3)
    if c < -1.0 + 1e-12:
        return np.diag([1.0, -1.0, -1.0])
    axis = np.cross(z, target)
    s = np.linalg.norm(axis)
    axis = axis / s
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def _reference_transverse(axis: np.ndarray) -> np.ndarray:
    """Deterministic unit vector orthogonal to `axis` (roll-zero closing dir)."""
    ref = np.array([1.0, 0.0, 0.0])
    if abs(axis @ ref) > 0.999:
        ref = np.array([0.0, 1.0, 0.0])
    v = ref - (ref @ axis) * axis
    return v / np.linalg.norm(v)


def _orientation_rotation(axis: np.ndarray, roll: float) -> np.ndarray:
    c0 = _reference_transverse(axis)
    closing = math.cos(roll) * c0 + math.sin(roll) * np.cross(axis, c0)
    height = np.cross(axis, closing)
    return np.column_stack([closing, height, axis])


def build_orientation_grid(
    camera_axis=(0.0, 0.0, 1.0),
    n_axes: int = 49,
    n_rolls: int = 4,
    cap_half_angle_deg: float = 90.0,
) -> OrientationGrid:
    """Fibonacci-spiral approach axes on the cap around `camera_axis`.

    Axis 0 is exactly the camera axis; the last axis sits on the cap rim.
    Rolls are evenly spaced over [0, 180) degrees: a parallel-jaw hand is
    symmetric under a 180-degree roll.
    """
    cam = np.asarray(camera_axis, dtype=np.float64)
    cam = cam / np.linalg.norm(cam)
    cos_cap = math.cos(math.radians(cap_half_angle_deg))
    i = np.arange(n_axes)
    cos_t = 1.0 - (1.0 - cos_cap) * (i / (n_axes - 1.0)) if n_axes > 1 else np.ones(1)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t**2))
    phi = i * GOLDEN_ANGLE
    local = np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])
    axes = local @ _rotation_to(cam).T
    axes[0] = cam  # exact, not within rounding
    rolls = np.arange(n_rolls) * (math.pi / n_rolls)
    return OrientationGrid(axes, rolls, cam, cap_half_angle_deg)


@dataclass
class GraspHypothesis:
    """One scored grasp candidate flowing through the detector."""

    sample_index: int
    orientation_index: int
    pose: Pose
    score_rot: float | None = None
    score_gc: float | None = None
    label: bool | None = None
    empty_region: bool = False
    push_offset: float = 0.0
    center_shift: float = 0.0
    refine_offset: float = 0.0
    required_aperture: float | None = None
    cluster_id: int | None = None
    is_cluster_center: bool = False

    @property
    def score(self) -> float:
        """Final ranking score: classifier when present, else proposal score."""
        if self.score_gc is not None:
            return self.score_gc
        return self.score_rot if self.score_rot is not None else 0.0


def grasp_pose(sample: np.ndarray, grid: OrientationGrid, orientation_index: int, hand: HandGeometry) -> Pose:
    """Hand pose with the closing-region centroid at `sample`."""
    r = grid.rotation(orientation_index)
    return Pose(r, np.asarray(sample, dtype=np.float64))


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray
    rotation: np.ndarray
    half_extents: np.ndarray

    def contains(self, points: np.ndarray, strict: bool = True) -> np.ndarray:
        local = (np.atleast_2d(points) - self.center) @ self.rotation
        if strict:
            return (np.abs(local) < self.half_extents).all(axis=1)
        return (np.abs(local) <= self.half_extents).all(axis=1)


def hand_occupancy(pose: Pose, hand: HandGeometry, aperture: float | None = None) -> list[OrientedBox]:
    """The three boxes the hand body occupies: two fingers and the base plate."""
    a = hand.max_aperture if aperture is None else aperture
    r, t = pose.rotation, pose.translation
    closing, approach = r[:, 0], r[:, 2]
    finger_half = np.array([hand.finger_thickness / 2, hand.hand_height / 2, hand.finger_length / 2])
    base_half = np.array(
        [a / 2 + hand.finger_thickness, hand.hand_height / 2, hand.base_depth / 2]
    )
    dx = (a + hand.finger_thickness) / 2
    base_z = -(hand.finger_length + hand.base_depth) / 2
    return [
        OrientedBox(t + dx * closing, r, finger_half),
        OrientedBox(t - dx * closing, r, finger_half),
        OrientedBox(t + base_z * approach, r, base_half),
    ]


def _hand_params(hand: HandGeometry, aperture: float | None):
    a = hand.max_aperture if aperture is None else float(aperture)
    return (
        a / 2.0,
        hand.finger_thickness,
        hand.hand_height / 2.0,
        hand.finger_length / 2.0,
        hand.base_depth,
    )


def in_collision(cloud: PointCloud, pose: Pose, hand: HandGeometry, aperture: float | None = None) -> bool:
    """True iff any cloud point lies strictly inside a finger or base box."""
    if not len(cloud):
        return False
    a2, t_fing, h2, l2, base = _hand_params(hand, aperture)
    pts = _prefilter(cloud, pose, hand, aperture)
    if not len(pts):
        return False
    return bool(
        _kernels.collision_only(pts, pose.rotation, pose.translation, a2, t_fing, h2, l2, base)
    )


def _prefilter(cloud: PointCloud, pose: Pose, hand: HandGeometry, aperture: float | None) -> np.ndarray:
    """Cut the cloud to a ball guaranteed to contain the hand's occupancy."""
    a2, t_fing, h2, l2, base = _hand_params(hand, aperture)
    reach = math.sqrt((a2 + t_fing) ** 2 + h2**2 + (l2 + base) ** 2) + 1e-9
    if len(cloud) <= 256:
        return cloud.points
    idx = cloud.index.radius(pose.translation, reach)
    return np.ascontiguousarray(cloud.points[idx])


def closing_region_points(
    cloud: PointCloud, pose: Pose, hand: HandGeometry, aperture: float | None = None
) -> np.ndarray:
    """Indices of cloud points inside the box between the fingers (closed bounds)."""
    if not len(cloud):
        return np.zeros(0, dtype=np.intp)
    a2, _, h2, l2, _ = _hand_params(hand, aperture)
    local = (cloud.points - pose.translation) @ pose.rotation
    inside = (
        (np.abs(local[:, 0]) <= a2)
        & (np.abs(local[:, 1]) <= h2)
        & (np.abs(local[:, 2]) <= l2)
    )
    return np.nonzero(inside)[0]


def push_forward(
    cloud: PointCloud, pose: Pose, hand: HandGeometry, step: float = 0.002,
    aperture: float | None = None,
) -> Pose | None:
    """Advance the hand along its approach axis until just before contact.

    Starting retracted so the closing region is empty, the hand steps forward;
    the result is the deepest collision-free pose whose closing region holds
    at least one point, or None when no such pose exists within
    finger_length + base_depth of travel.
    """
    if not len(cloud):
        return None
    # No spatial prefilter here: the walk scans the full approach line, so
    # every point in the lateral footprint matters regardless of depth.
    a2, t_fing, h2, l2, base = _hand_params(hand, aperture)
    off = _kernels.push_offset(
        cloud.points, pose.rotation, pose.translation, a2, t_fing, h2, l2, base, step
    )
    if math.isnan(off):
        return None
    return Pose._from_valid(pose.rotation, pose.translation + off * pose.rotation[:, 2])


def center_laterally(
    cloud: PointCloud, pose: Pose, hand: HandGeometry, aperture: float | None = None
) -> Pose:
    """Translate along the closing axis so the contained points average to zero."""
    idx = closing_region_points(cloud, pose, hand, aperture)
    if not len(idx):
        return pose
    local_x = (cloud.points[idx] - pose.translation) @ pose.rotation[:, 0]
    shift = float(local_x.mean())
    return Pose._from_valid(pose.rotation, pose.translation + shift * pose.rotation[:, 0])
