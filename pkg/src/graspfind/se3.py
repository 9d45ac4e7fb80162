"""Rigid transforms in SE(3) and rotation utilities.

A :class:`Pose` is an orthonormal rotation plus a translation, validated at
construction. Composition re-orthonormalizes automatically if accumulated
float drift ever exceeds 1e-7, so long chains of compositions stay valid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import Rng

__all__ = [
    "Pose",
    "rotation_about_axis",
    "look_at_rotation",
    "sample_sphere_viewpoints",
    "random_perturbation",
]

ORTHONORMAL_TOL = 1e-9
REORTHONORMALIZE_DRIFT = 1e-7


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for `angle` radians about unit `axis` (Rodrigues)."""
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("rotation axis must be nonzero")
    x, y, z = axis / n
    c, s = math.cos(angle), math.sin(angle)
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def _orthonormal_drift(r: np.ndarray) -> float:
    return float(np.abs(r.T @ r - np.eye(3)).max())


def _reorthonormalize(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    q = u @ vt
    if np.linalg.det(q) < 0:
        u[:, -1] = -u[:, -1]
        q = u @ vt
    return q


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p_world = rotation @ p_local + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.ascontiguousarray(self.rotation, dtype=np.float64)
        t = np.ascontiguousarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if _orthonormal_drift(r) > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant differs from 1 by more than 1e-9")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def _from_valid(r: np.ndarray, t: np.ndarray) -> "Pose":
        # Fast path for internally produced matrices; skips validation.
        p = object.__new__(Pose)
        object.__setattr__(p, "rotation", r)
        object.__setattr__(p, "translation", t)
        return p

    @classmethod
    def identity(cls) -> "Pose":
        return cls._from_valid(np.eye(3), np.zeros(3))

    @classmethod
    def from_axis_angle(cls, axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls(rotation_about_axis(axis, angle), np.asarray(translation, dtype=np.float64))

    def compose(self, other: "Pose") -> "Pose":
        """self applied after ... i.e. (self * other): first other, then self."""
        r = self.rotation @ other.rotation
        if _orthonormal_drift(r) > REORTHONORMALIZE_DRIFT:
            r = _reorthonormalize(r)
        t = self.rotation @ other.translation + self.translation
        return Pose._from_valid(r, t)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def invert(self) -> "Pose":
        rt = np.ascontiguousarray(self.rotation.T)
        return Pose._from_valid(rt, -(rt @ self.translation))

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply to one 3-vector or an (N, 3) array."""
        p = np.asarray(points, dtype=np.float64)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        """Rotation only (directions, normals)."""
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim == 1:
            return self.rotation @ v
        return v @ self.rotation.T


def look_at_rotation(forward: np.ndarray) -> np.ndarray:
    """Camera basis with optical axis `forward` (column 2).

    Column 1 (image up) is world +z projected into the plane orthogonal to
    `forward`; when `forward` is within ~0.03 deg of +-z the reference falls
    back to world +x. Column 0 completes the right-handed frame.
    """
    f = np.asarray(forward, dtype=np.float64)
    f = f / np.linalg.norm(f)
    up = np.array([0.0, 0.0, 1.0])
    proj = up - (up @ f) * f
    if np.linalg.norm(proj) < 1e-6:
        up = np.array([1.0, 0.0, 0.0])
        proj = up - (up @ f) * f
    y = proj / np.linalg.norm(proj)
    x = np.cross(y, f)
    return np.column_stack([x, y, f])


def sample_sphere_viewpoints(rng: Rng, count: int, radius: float) -> list[Pose]:
    """Camera poses at positions uniform on a sphere, all looking at the origin.

    The up-vector convention is the one of :func:`look_at_rotation`, so the
    poses are deterministic given the stream.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    poses = []
    for _ in range(count):
        pos = rng.unit_vector() * radius
        r = look_at_rotation(-pos / radius)
        poses.append(Pose(r, pos))
    return poses


def random_perturbation(rng: Rng, max_angle_deg: float, max_translation: float) -> Pose:
    """Small random rigid motion.

    Rotation angle uniform in [0, max_angle_deg] about a uniformly random
    axis; translation direction uniform on the sphere with magnitude uniform
    in [0, max_translation].
    """
    if max_angle_deg < 0 or max_translation < 0:
        raise ValueError("perturbation bounds must be nonnegative")
    axis = rng.unit_vector()
    angle = math.radians(rng.uniform(0.0, max_angle_deg))
    direction = rng.unit_vector()
    magnitude = rng.uniform(0.0, max_translation)
    return Pose(rotation_about_axis(axis, angle), direction * magnitude)
