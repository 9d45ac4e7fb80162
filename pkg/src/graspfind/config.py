"""Run configuration: one JSON file overrides any default in the pipeline.

Sections (all optional, all fields optional): ``hand``, ``oracle``, ``grid``,
``camera``, ``dataset``, ``detector``, ``train``, ``network``. Unknown keys
are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .dataset import DatasetConfig
from .detector import DetectorConfig
from .hand import HandGeometry, OrientationGrid, build_orientation_grid
from .nn.optim import TrainConfig
from .oracle import OracleConfig
from .scenes import CameraIntrinsics

__all__ = ["RunConfig", "load_config"]


@dataclass(frozen=True)
class NetworkDefaults:
    conv_channels: tuple[int, int] = (16, 32)
    fc_width: int = 256
    in_size: int = 60


@dataclass
class RunConfig:
    hand: HandGeometry
    oracle: OracleConfig
    grid: OrientationGrid
    camera: CameraIntrinsics
    dataset: DatasetConfig
    detector: DetectorConfig
    train: TrainConfig
    network: NetworkDefaults


def _build(cls, section: dict, what: str):
    valid = {f.name for f in fields(cls)}
    unknown = set(section) - valid
    if unknown:
        raise ValueError(f"unknown {what} config keys: {sorted(unknown)}")
    coerced = {}
    for key, value in section.items():
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    return cls(**coerced)


def load_config(path=None) -> RunConfig:
    """Config with defaults, overlaid by the JSON file when given."""
    raw = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ValueError("config root must be a JSON object")
        known = {"hand", "oracle", "grid", "camera", "dataset", "detector", "train", "network"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")

    hand = _build(HandGeometry, raw.get("hand", {}), "hand")
    oracle = _build(OracleConfig, raw.get("oracle", {}), "oracle")
    grid_section = dict(raw.get("grid", {}))
    camera_axis = grid_section.pop("camera_axis", (0.0, 0.0, 1.0))
    grid = build_orientation_grid(
        camera_axis=np.asarray(camera_axis, dtype=np.float64),
        n_axes=int(grid_section.pop("n_axes", 49)),
        n_rolls=int(grid_section.pop("n_rolls", 4)),
        cap_half_angle_deg=float(grid_section.pop("cap_half_angle_deg", 90.0)),
    )
    if grid_section:
        raise ValueError(f"unknown grid config keys: {sorted(grid_section)}")
    camera_section = dict(raw.get("camera", {}))
    camera = CameraIntrinsics.from_fov(
        width=int(camera_section.pop("width", 160)),
        height=int(camera_section.pop("height", 120)),
        hfov_deg=float(camera_section.pop("hfov_deg", 60.0)),
    )
    if camera_section:
        raise ValueError(f"unknown camera config keys: {sorted(camera_section)}")
    dataset = _build(DatasetConfig, raw.get("dataset", {}), "dataset")
    detector = _build(DetectorConfig, raw.get("detector", {}), "detector")
    train = _build(TrainConfig, raw.get("train", {}), "train")
    network = _build(NetworkDefaults, raw.get("network", {}), "network")
    return RunConfig(hand, oracle, grid, camera, dataset, detector, train, network)
