"""End-to-end two-stage detector, its single-stage ablations, clustering, and
grasp selection.

Modes:

* ``qd``: proposal scoring over the full orientation grid per sampled point,
  top-k orientations per point, uniform subsample down to the descriptor
  budget, pose corrections, grasp classification, top-k final.
* ``qd-rot``: proposal scores only; no descriptors, no classifier.
* ``qd-gc``: no proposal pruning; descriptors for every (point, orientation)
  pair, classifier scores for all of them.

All stages run inside one wall-clock window so detections-per-second is well
defined; per-stage breakdowns and counters are recorded on the result.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cloud import PointCloud
from .encoders import camera_frame, grasp_descriptor, orthographic_views, proposal_image
from .hand import (
    GraspHypothesis,
    HandGeometry,
    OrientationGrid,
    closing_region_points,
    center_laterally,
    grasp_pose,
    in_collision,
    push_forward,
)
from .nn.layers import Network
from .rng import Rng
from .se3 import Pose

__all__ = [
    "DetectorConfig",
    "DetectionResult",
    "EmptyCloud",
    "ModelMismatch",
    "detect",
    "detect_ablation",
    "cluster_grasps",
    "select_grasp",
    "GraspCluster",
]

MODES = ("qd", "qd-rot", "qd-gc")


class EmptyCloud(Exception):
    pass


class ModelMismatch(Exception):
    pass


@dataclass(frozen=True)
class DetectorConfig:
    n_samples: int = 500
    top_k_orientations: int = 20
    descriptor_budget: int = 300
    top_k_final: int = 150
    score_threshold: float = 0.5
    cluster_pos_tol: float = 0.01
    cluster_angle_tol_deg: float = 15.0
    min_cluster_size: int = 2
    heuristic_height_weight: float = 1.0
    heuristic_vertical_weight: float = 1.0
    heuristic_aperture_weight: float = -0.5
    push_step: float = 0.002
    refine_step: float = 0.001
    view_resolution: float = 0.002
    view_margin: float = 0.1
    crop: int = 60
    forward_batch: int = 256
    roi_lo: tuple[float, float, float] | None = None
    roi_hi: tuple[float, float, float] | None = None

    def __post_init__(self):
        if self.descriptor_budget > self.n_samples * self.top_k_orientations:
            raise ValueError("descriptor_budget exceeds n_samples * top_k_orientations")


@dataclass
class DetectionResult:
    hypotheses: list[GraspHypothesis]
    mode: str
    wall_time: float
    stage_seconds: dict[str, float]
    counters: dict[str, int]
    frame: Pose  # camera frame the grid lived in


def _batched_forward(network: Network, images: np.ndarray, batch: int) -> np.ndarray:
    out = []
    x = images.astype(np.float32, copy=False)
    for start in range(0, len(x), batch):
        out.append(network.forward(x[start:start + batch]))
    return np.concatenate(out, axis=0)


def _roi_indices(cloud: PointCloud, config: DetectorConfig) -> np.ndarray:
    if config.roi_lo is None or config.roi_hi is None:
        return np.arange(len(cloud))
    lo = np.asarray(config.roi_lo)
    hi = np.asarray(config.roi_hi)
    inside = ((cloud.points >= lo) & (cloud.points <= hi)).all(axis=1)
    return np.nonzero(inside)[0]


def _refine_forward(
    cloud: PointCloud, pose: Pose, hand: HandGeometry, step: float
) -> tuple[Pose, float]:
    """Post-centering push: when the nearest closing-region point is further
    than half the finger length from the base plane, advance while
    collision-free, capped so that point never leaves the region."""
    idx = closing_region_points(cloud, pose, hand)
    if not len(idx):
        return pose, 0.0
    local_z = (cloud.points[idx] - pose.translation) @ pose.rotation[:, 2]
    gap = float(local_z.min()) + hand.finger_length / 2.0
    if gap <= hand.finger_length / 2.0:
        return pose, 0.0
    advance = 0.0
    limit = gap
    approach = pose.rotation[:, 2]
    current = pose
    while advance + step <= limit:
        candidate = Pose._from_valid(current.rotation, current.translation + step * approach)
        if in_collision(cloud, candidate, hand):
            break
        current = candidate
        advance += step
    return current, advance


def _correct_pose(
    cloud: PointCloud, sample: np.ndarray, grid: OrientationGrid, orientation: int,
    hand: HandGeometry, config: DetectorConfig,
) -> tuple[Pose, float, float, float]:
    """Push-forward, lateral centering, then the conditional second push.

    Returns (pose, push_offset, center_shift, refine_offset); a failed push
    keeps the raw pose (its descriptor will be empty or near-empty and the
    classifier sees exactly that).
    """
    raw = grasp_pose(sample, grid, orientation, hand)
    pushed = push_forward(cloud, raw, hand, config.push_step)
    if pushed is None:
        return raw, math.nan, 0.0, 0.0
    push_off = float((pushed.translation - raw.translation) @ raw.rotation[:, 2])
    centered = center_laterally(cloud, pushed, hand)
    shift = float((centered.translation - pushed.translation) @ raw.rotation[:, 0])
    refined, refine_off = _refine_forward(cloud, centered, hand, config.refine_step)
    return refined, push_off, shift, refine_off


def detect(
    cloud: PointCloud,
    rot_network: Network,
    gc_network: Network | None,
    grid: OrientationGrid,
    hand: HandGeometry,
    config: DetectorConfig | None = None,
    rng: Rng | None = None,
    mode: str = "qd",
) -> DetectionResult:
    """Run the detector on one cloud; returns world-frame scored hypotheses."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    config = config or DetectorConfig()
    rng = rng or Rng(0)
    if not len(cloud):
        raise EmptyCloud("cannot detect grasps in an empty cloud")
    if rot_network.spec.out_width != grid.m:
        raise ModelMismatch(
            f"proposal network has {rot_network.spec.out_width} outputs, grid has {grid.m}"
        )
    if gc_network is not None and gc_network.spec.out_width != 1:
        raise ModelMismatch("grasp classifier must have one output")

    timers: dict[str, float] = {}
    counters: dict[str, int] = {}
    t_start = time.perf_counter()

    def stage(name, t0):
        timers[name] = timers.get(name, 0.0) + (time.perf_counter() - t0)

    # 1: sample points from the region of interest
    t0 = time.perf_counter()
    candidates = _roi_indices(cloud, config)
    if not len(candidates):
        raise EmptyCloud("region of interest holds no points")
    n = min(config.n_samples, len(candidates))
    picked = candidates[np.sort(rng.choice(len(candidates), n, replace=False))]
    stage("sample", t0)

    # 2: encode and score every orientation of every sample
    t0 = time.perf_counter()
    frame = camera_frame(cloud)
    to_cam = frame.invert()
    cloud_cam = cloud.transformed(to_cam)
    center = cloud_cam.centroid()
    span = np.abs(cloud_cam.points - center).max()
    cube = max(2.0 * span * (1.0 + config.view_margin), 2.0 * config.view_resolution)
    views = orthographic_views(cloud_cam.points, center, cube, config.view_resolution)
    samples_cam = cloud_cam.points[picked]
    images = np.stack(
        [proposal_image(views, s, config.crop) for s in samples_cam]
    )
    stage("encode", t0)

    t0 = time.perf_counter()
    rot_scores = _batched_forward(rot_network, images, config.forward_batch)
    counters["rot_scored"] = int(rot_scores.size)
    stage("rot_forward", t0)

    # 3 + 4: prune to top-k per point, then uniform subsample to the budget
    t0 = time.perf_counter()
    if mode == "qd":
        k = min(config.top_k_orientations, grid.m)
        top = np.argpartition(-rot_scores, k - 1, axis=1)[:, :k]
        pairs = [(int(i), int(o)) for i in range(n) for o in top[i]]
        budget = min(config.descriptor_budget, len(pairs))
        chosen = [pairs[j] for j in np.sort(rng.choice(len(pairs), budget, replace=False))]
    elif mode == "qd-gc":
        chosen = [(i, o) for i in range(n) for o in range(grid.m)]
    else:  # qd-rot
        k = min(config.top_k_final, rot_scores.size)
        flat = np.argpartition(-rot_scores.reshape(-1), k - 1)[:k]
        order = np.argsort(-rot_scores.reshape(-1)[flat], kind="stable")
        chosen = [(int(f // grid.m), int(f % grid.m)) for f in flat[order]]
    stage("prune", t0)

    # 5: pose corrections
    t0 = time.perf_counter()
    corrected = []
    for i, o in chosen:
        pose, push_off, shift, refine = _correct_pose(
            cloud_cam, samples_cam[i], grid, o, hand, config
        )
        corrected.append((i, o, pose, push_off, shift, refine))
    stage("correct", t0)

    hypotheses: list[GraspHypothesis] = []
    if mode == "qd-rot":
        counters["descriptors"] = 0
        for i, o, pose, push_off, shift, refine in corrected:
            hypotheses.append(
                _make_hypothesis(
                    frame, picked[i], o, pose, float(rot_scores[i, o]), None,
                    push_off, shift, refine, empty=math.isnan(push_off),
                )
            )
    else:
        if gc_network is None:
            raise ModelMismatch(f"mode {mode} needs a grasp classifier")
        # 6 + 7: descriptors and classifier scores, chunked to bound memory
        size = gc_network.spec.in_size
        gc_scores = np.empty(len(corrected))
        empties = np.zeros(len(corrected), dtype=bool)
        chunk = max(config.forward_batch, 2048)
        for start in range(0, len(corrected), chunk):
            block = corrected[start:start + chunk]
            t0 = time.perf_counter()
            desc = np.empty((len(block), 4, size, size), dtype=np.float32)
            for j, (i, o, pose, *_rest) in enumerate(block):
                d = grasp_descriptor(cloud_cam, pose, hand, size)
                desc[j] = d.image
                empties[start + j] = d.empty
            stage("descriptors", t0)
            t0 = time.perf_counter()
            gc_scores[start:start + len(block)] = _batched_forward(
                gc_network, desc, config.forward_batch
            )[:, 0]
            stage("gc_forward", t0)
        counters["descriptors"] = len(corrected)

        t0 = time.perf_counter()
        keep = np.argsort(-gc_scores, kind="stable")[: config.top_k_final]
        for j in keep:
            i, o, pose, push_off, shift, refine = corrected[j]
            hypotheses.append(
                _make_hypothesis(
                    frame, picked[i], o, pose, float(rot_scores[i, o]), float(gc_scores[j]),
                    push_off, shift, refine, empty=bool(empties[j]),
                )
            )
        stage("select", t0)

    wall = time.perf_counter() - t_start
    return DetectionResult(hypotheses, mode, wall, timers, counters, frame)


def _make_hypothesis(
    frame: Pose, sample_index: int, orientation: int, pose_cam: Pose,
    rot_score: float, gc_score: float | None,
    push_off: float, shift: float, refine: float, empty: bool,
) -> GraspHypothesis:
    world = frame.compose(pose_cam)
    return GraspHypothesis(
        sample_index=int(sample_index),
        orientation_index=int(orientation),
        pose=world,
        score_rot=rot_score,
        score_gc=gc_score,
        empty_region=empty,
        push_offset=0.0 if math.isnan(push_off) else push_off,
        center_shift=shift,
        refine_offset=refine,
    )


def detect_ablation(mode: str, *args, **kwargs) -> DetectionResult:
    """QD against its single-stage ablations; `mode` is qd, qd-rot, or qd-gc."""
    return detect(*args, mode=mode, **kwargs)


# ---------------------------------------------------------------------------
# clustering and selection


@dataclass
class GraspCluster:
    member_indices: list[int]
    center: GraspHypothesis


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    return math.degrees(math.acos(min(1.0, max(-1.0, float(u @ v)))))


def _aligned(a: Pose, b: Pose, pos_tol: float, angle_tol_deg: float) -> bool:
    if np.linalg.norm(a.translation - b.translation) >= pos_tol:
        return False
    if _angle_between(a.rotation[:, 2], b.rotation[:, 2]) >= angle_tol_deg:
        return False
    closing = _angle_between(a.rotation[:, 0], b.rotation[:, 0])
    return min(closing, 180.0 - closing) < angle_tol_deg


def cluster_grasps(
    hypotheses: list[GraspHypothesis], pos_tol: float = 0.01, angle_tol_deg: float = 15.0
) -> list[GraspCluster]:
    """Greedy agglomeration around the best-scoring unassigned hypothesis.

    Two grasps align when their translations are within pos_tol, their
    approach axes within angle_tol, and their closing axes within angle_tol
    modulo the hand's 180-degree roll symmetry. Every cluster (including
    singletons) gets a synthetic center grasp: mean member translation with
    the medoid member orientation.
    """
    order = sorted(
        range(len(hypotheses)), key=lambda i: (-hypotheses[i].score, i)
    )
    unassigned = set(order)
    clusters: list[GraspCluster] = []
    for seed in order:
        if seed not in unassigned:
            continue
        members = [
            i for i in order
            if i in unassigned and _aligned(
                hypotheses[seed].pose, hypotheses[i].pose, pos_tol, angle_tol_deg
            )
        ]
        unassigned.difference_update(members)
        mean_t = np.mean([hypotheses[i].pose.translation for i in members], axis=0)
        medoid = _medoid(hypotheses, members)
        center_pose = Pose(hypotheses[medoid].pose.rotation, mean_t)
        center = GraspHypothesis(
            sample_index=hypotheses[medoid].sample_index,
            orientation_index=hypotheses[medoid].orientation_index,
            pose=center_pose,
            score_rot=hypotheses[medoid].score_rot,
            score_gc=hypotheses[medoid].score_gc,
            is_cluster_center=True,
            cluster_id=len(clusters),
        )
        for i in members:
            hypotheses[i].cluster_id = len(clusters)
        clusters.append(GraspCluster(members, center))
    return clusters


def _medoid(hypotheses: list[GraspHypothesis], members: list[int]) -> int:
    if len(members) == 1:
        return members[0]
    best, best_cost = members[0], math.inf
    for i in members:
        cost = 0.0
        for j in members:
            if i == j:
                continue
            cost += _angle_between(
                hypotheses[i].pose.rotation[:, 2], hypotheses[j].pose.rotation[:, 2]
            )
            closing = _angle_between(
                hypotheses[i].pose.rotation[:, 0], hypotheses[j].pose.rotation[:, 0]
            )
            cost += min(closing, 180.0 - closing)
        if cost < best_cost - 1e-12:
            best, best_cost = i, cost
    return best


def required_aperture(cloud: PointCloud, hyp: GraspHypothesis, hand: HandGeometry) -> float:
    """Opening needed to fit the closing-region points: twice the widest
    closing-axis excursion from the hand center."""
    idx = closing_region_points(cloud, hyp.pose, hand)
    if not len(idx):
        return 0.0
    local_x = (cloud.points[idx] - hyp.pose.translation) @ hyp.pose.rotation[:, 0]
    return float(2.0 * np.abs(local_x).max())


def select_grasp(
    hypotheses: list[GraspHypothesis],
    clusters: list[GraspCluster],
    cloud: PointCloud,
    hand: HandGeometry,
    config: DetectorConfig | None = None,
) -> list[GraspHypothesis]:
    """Collision-filtered candidates in execution order.

    Tiers: centers of clusters with at least min_cluster_size members,
    their inliers, remaining grasps scoring above the threshold, then the
    rest. Within a tier, a weighted heuristic of min-max-normalized grasp
    height, approach verticality (downward approach is vertical), and
    required aperture decides; collisions with the cloud are excluded in
    every tier.
    """
    config = config or DetectorConfig()
    real = [c for c in clusters if len(c.member_indices) >= config.min_cluster_size]
    clustered = {i for c in real for i in c.member_indices}
    tiers: list[list[GraspHypothesis]] = [[], [], [], []]
    tiers[0] = [c.center for c in real]
    tiers[1] = [hypotheses[i] for c in real for i in c.member_indices]
    for i, h in enumerate(hypotheses):
        if i in clustered:
            continue
        tiers[2 if h.score > config.score_threshold else 3].append(h)

    candidates = [h for tier in tiers for h in tier]
    if not candidates:
        return []
    for h in candidates:
        if h.required_aperture is None:
            h.required_aperture = required_aperture(cloud, h, hand)
    heights = np.array([h.pose.translation[2] for h in candidates])
    verticals = np.array([-h.pose.rotation[2, 2] for h in candidates])
    apertures = np.array([h.required_aperture for h in candidates])

    def normalize(v: np.ndarray) -> np.ndarray:
        span = v.max() - v.min()
        return (v - v.min()) / span if span > 1e-12 else np.zeros_like(v)

    scores = (
        config.heuristic_height_weight * normalize(heights)
        + config.heuristic_vertical_weight * normalize(verticals)
        + config.heuristic_aperture_weight * normalize(apertures)
    )
    ranked: list[GraspHypothesis] = []
    pos = 0
    for tier in tiers:
        block = list(range(pos, pos + len(tier)))
        block.sort(key=lambda j: (-scores[j], j))
        for j in block:
            h = candidates[j]
            if in_collision(cloud, h.pose, hand):
                continue
            ranked.append(h)
        pos += len(tier)
    return ranked
