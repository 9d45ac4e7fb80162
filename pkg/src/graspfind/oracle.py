"""Analytic grasp labeling: antipodal force closure plus collision freedom.

A grasp of a parallel-jaw hand with soft contacts succeeds when the hand body
is collision-free and the fingers close onto two contact patches whose surface
normals lie inside opposing friction cones along the closing line. Contacts
are taken from a dense mesh-sampled surface with exact normals; the observed
partial cloud only steers hand placement (push-forward), never the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cloud import PointCloud
from .hand import HandGeometry, OrientationGrid, grasp_pose
from .rng import Rng
from .se3 import Pose
from .scenes import SceneSample

__all__ = [
    "OracleConfig",
    "antipodal",
    "grasp_label",
    "robust_label",
    "label_vector",
    "label_grid_batch",
    "pack_label_bits",
    "unpack_label_bits",
]


@dataclass(frozen=True)
class OracleConfig:
    """Friction and robustness parameters of the analytic oracle."""

    friction_coeff: float = 0.5
    contact_distance: float = 0.002
    votes: int = 5
    vote_threshold: int = 3
    perturb_angle_deg: float = 5.0
    perturb_translation: float = 0.003

    def __post_init__(self):
        if self.friction_coeff <= 0:
            raise ValueError("friction_coeff must be positive")
        if self.contact_distance <= 0:
            raise ValueError("contact_distance must be positive")
        if not (1 <= self.vote_threshold <= self.votes):
            raise ValueError("need 1 <= vote_threshold <= votes")

    @property
    def cone_cos(self) -> float:
        """cos of the friction half-angle atan(mu)."""
        return 1.0 / math.sqrt(1.0 + self.friction_coeff**2)


def _params(hand: HandGeometry):
    return (
        hand.max_aperture / 2.0,
        hand.finger_thickness,
        hand.hand_height / 2.0,
        hand.finger_length / 2.0,
        hand.base_depth,
    )


def antipodal(surface: PointCloud, pose: Pose, hand: HandGeometry, cfg: OracleConfig) -> bool:
    """Force-closure test with the fingers closed onto the surface points.

    Candidate contacts are the surface points in the closing region within
    `contact_distance` of the extreme closing-axis coordinates on each side;
    the grasp is antipodal when both sides hold a normal inside the friction
    cone facing its finger.
    """
    if surface.normals is None:
        raise ValueError("antipodal needs surface normals")
    if not len(surface):
        return False
    a2, t_fing, h2, l2, base = _params(hand)
    local = (surface.points - pose.translation) @ pose.rotation
    region = (
        (np.abs(local[:, 0]) <= a2)
        & (np.abs(local[:, 1]) <= h2)
        & (np.abs(local[:, 2]) <= l2)
    )
    if not region.any():
        return False
    x = local[region, 0]
    nx = (surface.normals @ pose.rotation[:, 0])[region]
    cos_phi = cfg.cone_cos
    cd = cfg.contact_distance
    hi_ok = bool((nx[x >= x.max() - cd] >= cos_phi).any())
    lo_ok = bool((-nx[x <= x.min() + cd] >= cos_phi).any())
    return hi_ok and lo_ok


def grasp_label(scene: SceneSample, pose: Pose, hand: HandGeometry, cfg: OracleConfig) -> bool:
    """True iff the pose is collision-free against the ground-truth surface
    and the closed fingers form an antipodal contact pair."""
    a2, t_fing, h2, l2, base = _params(hand)
    status = _kernels.eval_pose(
        scene.dense_surface.points,
        scene.dense_surface.normals,
        pose.rotation,
        pose.translation,
        a2, t_fing, h2, l2, base,
        cfg.cone_cos, cfg.contact_distance,
    )
    return status == _kernels.POSITIVE


def robust_label(
    scene: SceneSample, pose: Pose, hand: HandGeometry, cfg: OracleConfig, rng: Rng
) -> bool:
    """Majority vote of the label over the pose and votes-1 perturbed copies.

    Perturbations act locally: the rotation tilts the hand about its own
    origin and the translation shifts it, so the magnitudes stay the stated
    bounds regardless of where the grasp sits in the world.
    """
    from .se3 import random_perturbation

    positives = int(grasp_label(scene, pose, hand, cfg))
    for _ in range(cfg.votes - 1):
        delta = random_perturbation(rng, cfg.perturb_angle_deg, cfg.perturb_translation)
        perturbed = Pose(delta.rotation @ pose.rotation, pose.translation + delta.translation)
        positives += int(grasp_label(scene, perturbed, hand, cfg))
    return positives >= cfg.vote_threshold


def _sorted_frame(points: np.ndarray, rotation: np.ndarray):
    """Rotate into an orientation frame and sort rows by the y coordinate."""
    local = points @ rotation
    order = np.argsort(local[:, 1], kind="stable")
    local = local[order]
    return (
        np.ascontiguousarray(local[:, 0]),
        np.ascontiguousarray(local[:, 1]),
        np.ascontiguousarray(local[:, 2]),
        order,
    )


def label_grid_batch(
    scene: SceneSample,
    samples: np.ndarray,
    grid: OrientationGrid,
    hand: HandGeometry,
    cfg: OracleConfig,
    step: float = 0.002,
) -> tuple[np.ndarray, np.ndarray]:
    """Label vectors for a batch of sample points in one fused pass.

    Per (sample, orientation): place the hand, push forward against the
    observed cloud, then judge the pushed pose against the dense surface.
    Returns (bits, offsets): bits is (S, m) uint8 and offsets the pushed
    approach-axis offset per pose, NaN where the push found no contact.

    The heavy lifting shares work across samples: each orientation rotates
    and y-sorts the scene once, then every sample is a cheap sorted-slab scan.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    a2, t_fing, h2, l2, base = _params(hand)
    surf = scene.dense_surface
    cloud = scene.cloud
    n_s = len(samples)
    bits = np.zeros((n_s, grid.m), dtype=np.uint8)
    offsets = np.full((n_s, grid.m), np.nan)
    if not len(cloud):
        return bits, offsets
    out_bits = np.zeros(n_s, dtype=np.uint8)
    out_off = np.zeros(n_s)
    for oi in range(grid.m):
        rot = grid.rotation(oi)
        sx, sy, sz, order = _sorted_frame(surf.points, rot)
        s_nx = np.ascontiguousarray((surf.normals @ rot[:, 0])[order])
        cx, cy, cz, _ = _sorted_frame(cloud.points, rot)
        local_samples = np.ascontiguousarray(samples @ rot)
        _kernels.label_orientation(
            sx, sy, sz, s_nx, cx, cy, cz,
            local_samples, out_bits, out_off,
            a2, t_fing, h2, l2, base, cfg.cone_cos, cfg.contact_distance, step,
        )
        bits[:, oi] = out_bits
        offsets[:, oi] = out_off
    return bits, offsets


def label_vector(
    scene: SceneSample,
    sample_point: np.ndarray,
    grid: OrientationGrid,
    hand: HandGeometry,
    cfg: OracleConfig,
    step: float = 0.002,
) -> np.ndarray:
    """Multi-hot vector over the grid: bit i is 1 iff orientation i, pushed
    forward against the observed cloud, is a successful grasp."""
    bits, _ = label_grid_batch(scene, np.asarray(sample_point)[None, :], grid, hand, cfg, step)
    return bits[0]


def pack_label_bits(bits: np.ndarray) -> str:
    """Hex encoding of a multi-hot vector; bit i sits in byte i//8, bit i%8."""
    return np.packbits(bits.astype(np.uint8), bitorder="little").tobytes().hex()


def unpack_label_bits(hexstr: str, m: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:m]
