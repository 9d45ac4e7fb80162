"""Synthetic dataset generation and on-disk format.

Layout of a dataset directory::

    manifest.txt
    meshes/obj_####.off       ground-truth meshes (scaled, world frame)
    clouds/scene_#####.ply    observed clouds with estimated normals
    labels/scene_#####.rot    orientation label vectors
    labels/scene_#####.gc     grasp-classifier pose labels

Manifest: line-oriented text, floats with 9 significant digits.
``meta <key> <value...>`` lines carry every generation parameter; scene lines
have the documented field order::

    scene <id> <object_id> <category> <scale> <r00 r01 r02 r10 .. r22 tx ty tz>
          <mesh_file> <cloud_file> <rot_label_file> <gc_label_file>

(one line; camera pose row-major rotation then translation).

ROT label file: ``<cloud_point_index> <x> <y> <z> <hex>`` per sampled point,
world-frame coordinates, the multi-hot orientation vector hex-encoded with
bit i in byte i//8, bit i%8. GC label file: ``<record_index>
<orientation_index> <push_offset> <label>``, where record_index refers to the
same scene's ROT records in file order and the offset is the push-forward
advance along the approach axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cloud import PointCloud, estimate_normals
from .encoders import camera_frame, grasp_descriptor, orthographic_views, proposal_image
from .hand import HandGeometry, OrientationGrid, build_orientation_grid, grasp_pose
from .io import FLOAT_FMT, FormatError, load_off, save_off, load_ply, save_ply
from .meshes import PRIMITIVE_KINDS, TriangleMesh, random_primitive, sample_surface, scale_to_extents
from .oracle import OracleConfig, label_grid_batch, pack_label_bits, unpack_label_bits
from .rng import Rng
from .scenes import CameraIntrinsics, SceneSample, render_depth
from .se3 import Pose, sample_sphere_viewpoints

__all__ = [
    "DatasetConfig",
    "SceneRecord",
    "Manifest",
    "RotRecord",
    "GcRecord",
    "dataset_build",
    "load_rot_labels",
    "load_gc_labels",
    "load_scene_sample",
    "RotDataset",
    "GcDataset",
]


@dataclass(frozen=True)
class DatasetConfig:
    objects: int = 20
    views_per_object: int = 20
    samples_per_cloud: int = 100
    gc_pairs_per_cloud: int = 50
    extent_lo: float = 0.01
    extent_hi: float = 0.07
    sphere_radius: float = 0.5
    dense_surface_count: int = 20000
    push_step: float = 0.002
    view_resolution: float = 0.002
    view_margin: float = 0.1
    crop: int = 60
    seed: int = 0

    def to_meta(self) -> list[tuple[str, str]]:
        out = []
        for key, value in self.__dict__.items():
            if isinstance(value, float):
                out.append((f"dataset.{key}", FLOAT_FMT.format(value)))
            else:
                out.append((f"dataset.{key}", str(value)))
        out.append(("dataset.extent_convention", "max"))
        return out


@dataclass(frozen=True)
class SceneRecord:
    scene_id: int
    object_id: str
    category: str
    scale: float
    camera: Pose
    mesh_file: str
    cloud_file: str
    rot_file: str
    gc_file: str


@dataclass
class Manifest:
    meta: list[tuple[str, str]]
    scenes: list[SceneRecord]
    root: Path | None = None

    def meta_dict(self) -> dict[str, str]:
        return dict(self.meta)

    def dumps(self) -> str:
        lines = ["graspfind-dataset v1"]
        lines += [f"meta {k} {v}" for k, v in self.meta]
        for s in self.scenes:
            pose12 = list(s.camera.rotation.reshape(9)) + list(s.camera.translation)
            pose_txt = " ".join(FLOAT_FMT.format(v) for v in pose12)
            lines.append(
                f"scene {s.scene_id} {s.object_id} {s.category} "
                f"{FLOAT_FMT.format(s.scale)} {pose_txt} "
                f"{s.mesh_file} {s.cloud_file} {s.rot_file} {s.gc_file}"
            )
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def parse(cls, text: str, root: Path | None = None) -> "Manifest":
        lines = text.splitlines()
        if not lines or lines[0].strip() != "graspfind-dataset v1":
            raise FormatError("not a graspfind dataset manifest")
        meta: list[tuple[str, str]] = []
        scenes: list[SceneRecord] = []
        for line in lines[1:]:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "meta":
                meta.append((parts[1], " ".join(parts[2:])))
            elif parts[0] == "scene":
                floats = [float(x) for x in parts[5:17]]
                rotation = np.array(floats[:9]).reshape(3, 3)
                camera = Pose(rotation, np.array(floats[9:12]))
                scenes.append(
                    SceneRecord(
                        scene_id=int(parts[1]),
                        object_id=parts[2],
                        category=parts[3],
                        scale=float(parts[4]),
                        camera=camera,
                        mesh_file=parts[17],
                        cloud_file=parts[18],
                        rot_file=parts[19],
                        gc_file=parts[20],
                    )
                )
            else:
                raise FormatError(f"unknown manifest record {parts[0]!r}")
        return cls(meta, scenes, root)

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.txt"
        return cls.parse(path.read_text(), root=path.parent)

    # reconstruction helpers -------------------------------------------------

    def grid(self) -> OrientationGrid:
        d = self.meta_dict()
        return build_orientation_grid(
            camera_axis=np.array([float(x) for x in d["grid.camera_axis"].split()]),
            n_axes=int(d["grid.n_axes"]),
            n_rolls=int(d["grid.n_rolls"]),
            cap_half_angle_deg=float(d["grid.cap_half_angle_deg"]),
        )

    def hand(self) -> HandGeometry:
        d = self.meta_dict()
        return HandGeometry(
            finger_length=float(d["hand.finger_length"]),
            finger_thickness=float(d["hand.finger_thickness"]),
            hand_height=float(d["hand.hand_height"]),
            max_aperture=float(d["hand.max_aperture"]),
            base_depth=float(d["hand.base_depth"]),
        )

    def oracle(self) -> OracleConfig:
        d = self.meta_dict()
        return OracleConfig(
            friction_coeff=float(d["oracle.friction_coeff"]),
            contact_distance=float(d["oracle.contact_distance"]),
            votes=int(d["oracle.votes"]),
            vote_threshold=int(d["oracle.vote_threshold"]),
            perturb_angle_deg=float(d["oracle.perturb_angle_deg"]),
            perturb_translation=float(d["oracle.perturb_translation"]),
        )

    def dataset_config(self) -> DatasetConfig:
        d = self.meta_dict()
        kwargs = {}
        for key, default in DatasetConfig().__dict__.items():
            raw = d[f"dataset.{key}"]
            kwargs[key] = type(default)(raw) if not isinstance(default, float) else float(raw)
        return DatasetConfig(**kwargs)


@dataclass(frozen=True)
class RotRecord:
    point_index: int
    point: np.ndarray
    bits: np.ndarray


@dataclass(frozen=True)
class GcRecord:
    record_index: int
    orientation_index: int
    offset: float
    label: int


def _write_rot_labels(path, records: list[RotRecord], m: int) -> None:
    lines = [f"rot-labels v1 m={m}"]
    for r in records:
        coords = " ".join(FLOAT_FMT.format(v) for v in r.point)
        lines.append(f"{r.point_index} {coords} {pack_label_bits(r.bits)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_rot_labels(path) -> tuple[list[RotRecord], int]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("rot-labels v1"):
        raise FormatError("not a rot-labels file")
    m = int(lines[0].split("m=")[1])
    records = []
    for line in lines[1:]:
        parts = line.split()
        if not parts:
            continue
        records.append(
            RotRecord(
                point_index=int(parts[0]),
                point=np.array([float(x) for x in parts[1:4]]),
                bits=unpack_label_bits(parts[4], m),
            )
        )
    return records, m


def _write_gc_labels(path, records: list[GcRecord]) -> None:
    lines = ["gc-labels v1"]
    for r in records:
        lines.append(
            f"{r.record_index} {r.orientation_index} {FLOAT_FMT.format(r.offset)} {r.label}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_gc_labels(path) -> list[GcRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "gc-labels v1":
        raise FormatError("not a gc-labels file")
    out = []
    for line in lines[1:]:
        parts = line.split()
        if not parts:
            continue
        out.append(GcRecord(int(parts[0]), int(parts[1]), float(parts[2]), int(parts[3])))
    return out


def _select_gc_pairs(rng: Rng, bits: np.ndarray, offsets: np.ndarray, budget: int) -> list[tuple[int, int]]:
    """Balanced (record, orientation) picks among poses whose push succeeded."""
    valid = np.isfinite(offsets)
    pos = np.argwhere(valid & (bits == 1))
    neg = np.argwhere(valid & (bits == 0))
    n_pos = min(len(pos), budget // 2)
    n_neg = min(len(neg), budget - n_pos)
    n_pos = min(len(pos), budget - n_neg)
    picks = []
    if n_pos:
        picks += [tuple(pos[i]) for i in rng.choice(len(pos), n_pos, replace=False)]
    if n_neg:
        picks += [tuple(neg[i]) for i in rng.choice(len(neg), n_neg, replace=False)]
    return sorted((int(a), int(b)) for a, b in picks)


def dataset_build(
    out_dir,
    config: DatasetConfig | None = None,
    hand: HandGeometry | None = None,
    oracle_cfg: OracleConfig | None = None,
    grid: OrientationGrid | None = None,
    intrinsics: CameraIntrinsics | None = None,
    progress=None,
) -> Manifest:
    """Generate a full dataset on disk and return its manifest.

    Objects cycle through the primitive kinds; each object is observed from
    camera positions uniform on a sphere looking at the origin. Every sampled
    cloud point gets a multi-hot orientation label vector (push-forward
    against the observed cloud, verdict against the dense ground-truth
    surface), plus a balanced set of classifier pose labels.
    """
    config = config or DatasetConfig()
    hand = hand or HandGeometry()
    oracle_cfg = oracle_cfg or OracleConfig()
    grid = grid or build_orientation_grid()
    intrinsics = intrinsics or CameraIntrinsics.from_fov()
    root = Path(out_dir)
    for sub in ("meshes", "clouds", "labels"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    rng = Rng(config.seed)

    meta: list[tuple[str, str]] = config.to_meta()
    for name, value in hand.__dict__.items():
        meta.append((f"hand.{name}", FLOAT_FMT.format(value)))
    for name, value in oracle_cfg.__dict__.items():
        fmt = FLOAT_FMT.format(value) if isinstance(value, float) else str(value)
        meta.append((f"oracle.{name}", fmt))
    g = grid.to_dict()
    meta += [
        ("grid.n_axes", str(g["n_axes"])),
        ("grid.n_rolls", str(g["n_rolls"])),
        ("grid.cap_half_angle_deg", FLOAT_FMT.format(g["cap_half_angle_deg"])),
        ("grid.camera_axis", " ".join(FLOAT_FMT.format(v) for v in g["camera_axis"])),
    ]
    meta += [
        ("camera.width", str(intrinsics.width)),
        ("camera.height", str(intrinsics.height)),
        ("camera.fx", FLOAT_FMT.format(intrinsics.fx)),
        ("camera.fy", FLOAT_FMT.format(intrinsics.fy)),
        ("camera.cx", FLOAT_FMT.format(intrinsics.cx)),
        ("camera.cy", FLOAT_FMT.format(intrinsics.cy)),
    ]

    scenes: list[SceneRecord] = []
    scene_id = 0
    for obj_idx in range(config.objects):
        kind = PRIMITIVE_KINDS[obj_idx % len(PRIMITIVE_KINDS)]
        object_id = f"obj_{obj_idx:04d}"
        mesh = random_primitive(
            rng.child(f"object/{obj_idx}/shape"), kind, config.extent_lo, config.extent_hi
        )
        mesh, scale = scale_to_extents(
            mesh, rng.child(f"object/{obj_idx}/scale"), config.extent_lo, config.extent_hi
        )
        mesh_file = f"meshes/{object_id}.off"
        save_off(root / mesh_file, mesh)
        dense = sample_surface(
            mesh, rng.child(f"object/{obj_idx}/surface"), config.dense_surface_count
        )
        cameras = sample_sphere_viewpoints(
            rng.child(f"object/{obj_idx}/views"), config.views_per_object, config.sphere_radius
        )
        for view_idx, camera in enumerate(cameras):
            cloud = render_depth(mesh, camera, intrinsics)
            if not len(cloud):
                raise RuntimeError(
                    f"{object_id} view {view_idx} rendered an empty cloud; "
                    "the object left the camera frustum"
                )
            cloud = estimate_normals(cloud)
            pick_rng = rng.child(f"object/{obj_idx}/view/{view_idx}/samples")
            replace_draw = len(cloud) < config.samples_per_cloud
            picked = np.sort(
                pick_rng.choice(len(cloud), config.samples_per_cloud, replace=replace_draw)
            )
            frame = camera_frame(cloud)
            to_cam = frame.invert()
            scene_cam = SceneSample(
                mesh.transformed(to_cam),
                to_cam.compose(camera),
                cloud.transformed(to_cam),
                dense.transformed(to_cam),
            )
            samples_cam = scene_cam.cloud.points[picked]
            bits, offsets = label_grid_batch(
                scene_cam, samples_cam, grid, hand, oracle_cfg, config.push_step
            )
            rot_records = [
                RotRecord(int(picked[i]), cloud.points[picked[i]], bits[i])
                for i in range(len(picked))
            ]
            gc_rng = rng.child(f"object/{obj_idx}/view/{view_idx}/gc")
            gc_records = [
                GcRecord(int(r), int(o), float(offsets[r, o]), int(bits[r, o]))
                for r, o in _select_gc_pairs(gc_rng, bits, offsets, config.gc_pairs_per_cloud)
            ]
            cloud_file = f"clouds/scene_{scene_id:05d}.ply"
            rot_file = f"labels/scene_{scene_id:05d}.rot"
            gc_file = f"labels/scene_{scene_id:05d}.gc"
            save_ply(root / cloud_file, cloud)
            _write_rot_labels(root / rot_file, rot_records, grid.m)
            _write_gc_labels(root / gc_file, gc_records)
            scenes.append(
                SceneRecord(
                    scene_id, object_id, kind, scale, camera,
                    mesh_file, cloud_file, rot_file, gc_file,
                )
            )
            if progress is not None:
                progress(scene_id, object_id, view_idx, int(bits.sum()))
            scene_id += 1

    manifest = Manifest(meta, scenes, root)
    manifest.save(root / "manifest.txt")
    return manifest


def load_scene_sample(manifest: Manifest, scene_index: int) -> SceneSample:
    """Reconstruct the ground-truth scene for oracle evaluation.

    The dense surface is regenerated from the dataset seed, so it matches the
    surface used at build time up to the mesh file's 9-digit rounding.
    """
    record = manifest.scenes[scene_index]
    root = manifest.root or Path(".")
    mesh = load_off(root / record.mesh_file)
    cloud = load_ply(root / record.cloud_file)
    config = manifest.dataset_config()
    obj_idx = int(record.object_id.split("_")[1])
    dense = sample_surface(
        mesh, Rng(config.seed).child(f"object/{obj_idx}/surface"), config.dense_surface_count
    )
    return SceneSample(mesh, record.camera, cloud, dense)


# ---------------------------------------------------------------------------
# training adapters


class _SceneCache:
    """Per-scene camera frame, orthographic views, and camera-frame cloud."""

    def __init__(self, manifest: Manifest, crop: int, resolution: float, margin: float):
        self.manifest = manifest
        self.crop = crop
        self.resolution = resolution
        self.margin = margin
        self._views: dict[int, tuple] = {}

    def views(self, scene_index: int):
        if scene_index not in self._views:
            record = self.manifest.scenes[scene_index]
            root = self.manifest.root or Path(".")
            cloud = load_ply(root / record.cloud_file)
            frame = camera_frame(cloud)
            cloud_cam = cloud.transformed(frame.invert())
            center = cloud_cam.centroid()
            span = np.abs(cloud_cam.points - center).max()
            cube = max(2.0 * span * (1.0 + self.margin), 2.0 * self.resolution)
            views = orthographic_views(cloud_cam.points, center, cube, self.resolution)
            self._views[scene_index] = (views, cloud_cam, frame)
        return self._views[scene_index]


class RotDataset:
    """(proposal image, multi-hot labels) pairs across a manifest."""

    def __init__(self, manifest: Manifest, scene_indices=None):
        config = manifest.dataset_config()
        self.cache = _SceneCache(manifest, config.crop, config.view_resolution, config.view_margin)
        self.manifest = manifest
        self.crop = config.crop
        self.entries: list[tuple[int, np.ndarray, np.ndarray]] = []
        indices = range(len(manifest.scenes)) if scene_indices is None else scene_indices
        root = manifest.root or Path(".")
        for si in indices:
            records, m = load_rot_labels(root / manifest.scenes[si].rot_file)
            self.m = m
            for r in records:
                self.entries.append((si, r.point, r.bits))

    def __len__(self) -> int:
        return len(self.entries)

    def batch(self, indices) -> tuple[np.ndarray, np.ndarray]:
        xs = np.empty((len(indices), 3, self.crop, self.crop))
        ys = np.empty((len(indices), self.m))
        for row, i in enumerate(indices):
            si, point, bits = self.entries[i]
            views, _, frame = self.cache.views(si)
            xs[row] = proposal_image(views, frame.invert().transform(point), self.crop)
            ys[row] = bits
        return xs, ys

    def base_rate(self) -> float:
        total = sum(bits.sum() for _, _, bits in self.entries)
        return float(total) / (len(self.entries) * self.m)


class GcDataset:
    """(grasp descriptor, success bit) pairs across a manifest."""

    def __init__(self, manifest: Manifest, scene_indices=None, descriptor_size: int = 60):
        config = manifest.dataset_config()
        self.cache = _SceneCache(manifest, config.crop, config.view_resolution, config.view_margin)
        self.manifest = manifest
        self.hand = manifest.hand()
        self.grid = manifest.grid()
        self.size = descriptor_size
        self.entries: list[tuple[int, np.ndarray, int, float, int]] = []
        indices = range(len(manifest.scenes)) if scene_indices is None else scene_indices
        root = manifest.root or Path(".")
        for si in indices:
            rot_records, _ = load_rot_labels(root / manifest.scenes[si].rot_file)
            for g in load_gc_labels(root / manifest.scenes[si].gc_file):
                point = rot_records[g.record_index].point
                self.entries.append((si, point, g.orientation_index, g.offset, g.label))

    def __len__(self) -> int:
        return len(self.entries)

    def batch(self, indices) -> tuple[np.ndarray, np.ndarray]:
        xs = np.empty((len(indices), 4, self.size, self.size))
        ys = np.empty((len(indices), 1))
        for row, i in enumerate(indices):
            si, point, oi, offset, label = self.entries[i]
            _, cloud_cam, frame = self.cache.views(si)
            pose = grasp_pose(frame.invert().transform(point), self.grid, oi, self.hand)
            pushed = Pose._from_valid(
                pose.rotation, pose.translation + offset * pose.rotation[:, 2]
            )
            xs[row] = grasp_descriptor(cloud_cam, pushed, self.hand, self.size).image
            ys[row, 0] = label
        return xs, ys

    def positive_rate(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e[4] for e in self.entries) / len(self.entries)
