"""Kernel benchmarks: compiled extension vs the numpy fallback.

Times the three hot kernels on realistic inputs derived from a given cloud
and checks that both backends agree on the results while they are at it.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels
from .cloud import PointCloud
from .hand import HandGeometry, OrientationGrid
from .meshes import sphere_mesh
from .oracle import OracleConfig
from .rng import Rng

__all__ = ["compare_backends"]


def _time(fn, repeat: int = 3) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def compare_backends(
    cloud: PointCloud,
    hand: HandGeometry,
    oracle_cfg: OracleConfig,
    grid: OrientationGrid,
    emit=print,
) -> dict:
    """Per-kernel best-of-3 timings for every available backend."""
    rng = Rng(1234)
    mesh = sphere_mesh(0.03, 3)
    a2 = hand.max_aperture / 2.0
    h2 = hand.hand_height / 2.0
    l2 = hand.finger_length / 2.0

    pts = cloud.points
    center = pts.mean(axis=0)
    n_pts = len(pts)
    sample_ids = rng.choice(n_pts, min(32, n_pts), replace=False)

    # shared inputs for label_orientation: one grid orientation, y-sorted
    rot = grid.rotation(17)
    local = pts @ rot
    order = np.argsort(local[:, 1], kind="stable")
    sx, sy, sz = (np.ascontiguousarray(local[order, i]) for i in range(3))
    normals = cloud.normals if cloud.normals is not None else np.tile([0.0, 0.0, 1.0], (n_pts, 1))
    s_nx = np.ascontiguousarray((normals @ rot[:, 0])[order])
    samples = np.ascontiguousarray(pts[sample_ids] @ rot)

    verts = np.ascontiguousarray(mesh.vertices - center + np.array([0.0, 0.0, 0.4]))
    tris = np.ascontiguousarray(mesh.triangles, dtype=np.int32)

    region = rng.normal(0.0, 0.01, (512, 3))
    region_n = region / np.linalg.norm(region, axis=1, keepdims=True)

    results: dict[str, dict[str, float]] = {}
    reference: dict[str, np.ndarray] = {}
    for name in _kernels.available_backends():
        impl = _kernels.get_backend(name)
        timings: dict[str, float] = {}

        bits = np.zeros(len(samples), dtype=np.uint8)
        offs = np.zeros(len(samples))

        def run_label():
            impl.label_orientation(
                sx, sy, sz, s_nx, sx, sy, sz, samples, bits, offs,
                a2, hand.finger_thickness, h2, l2, hand.base_depth,
                oracle_cfg.cone_cos, oracle_cfg.contact_distance, 0.002,
            )

        timings["label_orientation"] = _time(run_label)

        def run_raycast():
            return impl.raycast_cam(verts, tris, 138.56, 138.56, 80.0, 60.0, 160, 120)

        timings["raycast"] = _time(run_raycast)

        def run_descriptor():
            return impl.descriptor_fill(
                np.ascontiguousarray(region[:, 0]),
                np.ascontiguousarray(region[:, 1]),
                np.ascontiguousarray(region[:, 2]),
                np.ascontiguousarray(region_n[:, 0]),
                np.ascontiguousarray(region_n[:, 1]),
                np.ascontiguousarray(region_n[:, 2]),
                a2, h2, l2, 60,
            )

        timings["descriptor_fill"] = _time(run_descriptor)

        results[name] = timings
        outputs = {
            "bits": bits.copy(),
            "depth": run_raycast(),
            "descriptor": run_descriptor(),
        }
        for key, value in outputs.items():
            if key not in reference:
                reference[key] = value
            else:
                if key == "bits":
                    agree = np.array_equal(reference[key], value)
                else:
                    agree = np.allclose(reference[key], value, atol=1e-12, equal_nan=True)
                if not agree:
                    emit(f"bench: WARNING backend disagreement on {key}")

    emit(f"{'kernel':<20}" + "".join(f"{n:>14}" for n in results))
    for kernel in ("label_orientation", "raycast", "descriptor_fill"):
        row = f"{kernel:<20}"
        for name in results:
            row += f"{results[name][kernel] * 1e3:>12.2f}ms"
        emit(row)
    if len(results) == 2:
        emit(
            "speedup native/python: "
            + ", ".join(
                f"{kernel} {results['python'][kernel] / results['native'][kernel]:.1f}x"
                for kernel in results["native"]
            )
        )
    return results
