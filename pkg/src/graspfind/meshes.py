"""Triangle meshes: validation, measurement, procedural primitives.

The primitive builders produce watertight meshes and stand in for external
object datasets; user meshes load through :mod:`graspfind.io`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .rng import Rng
from .se3 import Pose

__all__ = [
    "TriangleMesh",
    "DegenerateMesh",
    "InvalidSpec",
    "box_mesh",
    "cylinder_mesh",
    "sphere_mesh",
    "bottle_mesh",
    "cup_mesh",
    "PRIMITIVE_KINDS",
    "random_primitive",
    "scale_to_extents",
    "sample_surface",
]

MIN_TRIANGLE_AREA = 1e-12


class DegenerateMesh(Exception):
    pass


class InvalidSpec(Exception):
    pass


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int32).reshape(-1, 3)
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if len(t) and self.areas().min() <= MIN_TRIANGLE_AREA:
            raise ValueError("mesh contains a degenerate triangle")

    def __len__(self) -> int:
        return len(self.triangles)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v, t = self.vertices, self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def areas(self) -> np.ndarray:
        a, b, c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def normals(self) -> np.ndarray:
        """Unit normals, outward for consistently wound meshes."""
        a, b, c = self.corners()
        n = np.cross(b - a, c - a)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not len(self.vertices):
            raise DegenerateMesh("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def extents(self) -> np.ndarray:
        lo, hi = self.bounds()
        return hi - lo

    def volume(self) -> float:
        """Signed volume via the divergence theorem (positive when outward-wound)."""
        a, b, c = self.corners()
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def surface_area(self) -> float:
        return float(self.areas().sum())

    def transformed(self, pose: Pose) -> "TriangleMesh":
        return TriangleMesh(pose.transform(self.vertices), self.triangles)

    def scaled(self, factor: float) -> "TriangleMesh":
        return TriangleMesh(self.vertices * float(factor), self.triangles)


# ---------------------------------------------------------------------------
# primitives

def box_mesh(sx: float, sy: float, sz: float) -> TriangleMesh:
    """Axis-aligned box with the given full extents, centered at the origin."""
    _require_positive(sx=sx, sy=sy, sz=sz)
    hx, hy, hz = sx / 2.0, sy / 2.0, sz / 2.0
    v = np.array(
        [
            [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
            [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
        ]
    )
    t = np.array(
        [
            [0, 2, 1], [0, 3, 2],          # -z
            [4, 5, 6], [4, 6, 7],          # +z
            [0, 1, 5], [0, 5, 4],          # -y
            [2, 3, 7], [2, 7, 6],          # +y
            [1, 2, 6], [1, 6, 5],          # +x
            [3, 0, 4], [3, 4, 7],          # -x
        ],
        dtype=np.int32,
    )
    return TriangleMesh(v, t)


def _ring(radius: float, z: float, segments: int) -> np.ndarray:
    ang = 2.0 * math.pi * np.arange(segments) / segments
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang), np.full(segments, z)])


def _tube(first: int, second: int, segments: int, flip: bool = False) -> list[list[int]]:
    """Triangles joining two vertex rings laid out at offsets first/second."""
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        a, b = first + i, first + j
        c, d = second + i, second + j
        if flip:
            tris += [[a, c, b], [b, c, d]]
        else:
            tris += [[a, b, c], [b, d, c]]
    return tris


def _fan(center: int, ring_start: int, segments: int, flip: bool = False) -> list[list[int]]:
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        if flip:
            tris.append([center, ring_start + j, ring_start + i])
        else:
            tris.append([center, ring_start + i, ring_start + j])
    return tris


def cylinder_mesh(radius: float, height: float, segments: int = 32) -> TriangleMesh:
    """Closed cylinder, axis +z, centered at the origin."""
    _require_positive(radius=radius, height=height)
    if segments < 3:
        raise InvalidSpec("segments must be >= 3")
    h = height / 2.0
    bottom = _ring(radius, -h, segments)
    top = _ring(radius, h, segments)
    v = np.vstack([bottom, top, [[0.0, 0.0, -h]], [[0.0, 0.0, h]]])
    cb, ct = 2 * segments, 2 * segments + 1
    tris = _tube(0, segments, segments)
    tris += _fan(cb, 0, segments, flip=True)
    tris += _fan(ct, segments, segments)
    return TriangleMesh(v, np.array(tris, dtype=np.int32))


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    t = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int32,
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), t


def sphere_mesh(radius: float, subdivisions: int = 3) -> TriangleMesh:
    """Icosphere: subdivided icosahedron with vertices snapped to the radius."""
    _require_positive(radius=radius)
    v, t = _icosahedron()
    for _ in range(subdivisions):
        edge_mid: dict[tuple[int, int], int] = {}
        verts = list(v)
        new_t = []

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in edge_mid:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                edge_mid[key] = len(verts) - 1
            return edge_mid[key]

        for a, b, c in t:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_t += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v = np.array(verts)
        t = np.array(new_t, dtype=np.int32)
    return TriangleMesh(v * radius, t)


def bottle_mesh(base_radius: float, top_radius: float, height: float, segments: int = 32) -> TriangleMesh:
    """Capped cone frustum, a crude bottle: wide base ring tapering to the top."""
    _require_positive(base_radius=base_radius, top_radius=top_radius, height=height)
    h = height / 2.0
    bottom = _ring(base_radius, -h, segments)
    top = _ring(top_radius, h, segments)
    v = np.vstack([bottom, top, [[0.0, 0.0, -h]], [[0.0, 0.0, h]]])
    cb, ct = 2 * segments, 2 * segments + 1
    tris = _tube(0, segments, segments)
    tris += _fan(cb, 0, segments, flip=True)
    tris += _fan(ct, segments, segments)
    return TriangleMesh(v, np.array(tris, dtype=np.int32))


def cup_mesh(radius: float, height: float, wall: float, segments: int = 32) -> TriangleMesh:
    """Open vessel (mug/bowl body): hollow cylinder with wall thickness.

    Watertight: outer wall, inner wall down to an inner floor, rim annulus,
    and outer floor.
    """
    _require_positive(radius=radius, height=height, wall=wall)
    if wall >= radius:
        raise InvalidSpec("wall thickness must be below the radius")
    if wall >= height:
        raise InvalidSpec("wall thickness must be below the height")
    h = height / 2.0
    inner_r = radius - wall
    floor_z = -h + wall
    outer_bottom = _ring(radius, -h, segments)          # 0
    outer_top = _ring(radius, h, segments)              # s
    inner_top = _ring(inner_r, h, segments)             # 2s
    inner_floor = _ring(inner_r, floor_z, segments)     # 3s
    v = np.vstack(
        [outer_bottom, outer_top, inner_top, inner_floor,
         [[0.0, 0.0, -h]], [[0.0, 0.0, floor_z]]]
    )
    cb, cf = 4 * segments, 4 * segments + 1
    tris = _tube(0, segments, segments)                       # outer wall
    tris += _tube(segments, 2 * segments, segments)           # rim annulus
    tris += _tube(2 * segments, 3 * segments, segments)       # inner wall
    tris += _fan(cb, 0, segments, flip=True)                  # outer floor
    tris += _fan(cf, 3 * segments, segments)                  # inner floor
    return TriangleMesh(v, np.array(tris, dtype=np.int32))


PRIMITIVE_KINDS = ("box", "cylinder", "sphere", "bottle", "cup")


def random_primitive(rng: Rng, kind: str, lo: float = 0.02, hi: float = 0.07) -> TriangleMesh:
    """Primitive of the given kind with dimensions drawn from [lo, hi]."""
    if kind not in PRIMITIVE_KINDS:
        raise InvalidSpec(f"unknown primitive kind {kind!r}")
    if not (0 < lo < hi):
        raise InvalidSpec("need 0 < lo < hi")
    u = lambda a, b: float(rng.uniform(a, b))
    if kind == "box":
        return box_mesh(u(lo, hi), u(lo, hi), u(lo, hi))
    if kind == "cylinder":
        return cylinder_mesh(u(lo / 2, hi / 2), u(lo, hi))
    if kind == "sphere":
        return sphere_mesh(u(lo / 2, hi / 2))
    if kind == "bottle":
        base = u(lo / 2, hi / 2)
        return bottle_mesh(base, base * u(0.4, 0.8), u(lo, hi))
    wall = u(0.002, 0.005)
    radius = u(max(lo / 2, wall * 2.5), hi / 2)
    return cup_mesh(radius, u(lo, hi), wall)


def scale_to_extents(mesh: TriangleMesh, rng: Rng, lo: float, hi: float) -> tuple[TriangleMesh, float]:
    """Uniformly rescale so the max bounding-box extent is uniform in [lo, hi].

    The result is recentered so its bounding box is centered at the origin.
    Returns (mesh, applied scale factor).
    """
    if not (0 < lo <= hi):
        raise ValueError("need 0 < lo <= hi")
    if not len(mesh.vertices):
        raise DegenerateMesh("cannot scale an empty mesh")
    current = float(mesh.extents().max())
    if current <= 0:
        raise DegenerateMesh("bounding box has zero extent")
    target = float(rng.uniform(lo, hi))
    factor = target / current
    v = mesh.vertices * factor
    bb_lo, bb_hi = v.min(axis=0), v.max(axis=0)
    v = v - (bb_lo + bb_hi) / 2.0
    return TriangleMesh(v, mesh.triangles), factor


def sample_surface(mesh: TriangleMesh, rng: Rng, count: int) -> PointCloud:
    """Area-weighted uniform surface samples with exact triangle normals."""
    if count < 1:
        raise ValueError("count must be >= 1")
    areas = mesh.areas()
    total = areas.sum()
    if not len(areas) or total <= 0:
        raise DegenerateMesh("mesh has zero surface area")
    cdf = np.cumsum(areas) / total
    tri_idx = np.searchsorted(cdf, rng.random(count), side="right")
    tri_idx = np.minimum(tri_idx, len(areas) - 1)
    a, b, c = mesh.corners()
    a, b, c = a[tri_idx], b[tri_idx], c[tri_idx]
    # sqrt trick: uniform over each triangle
    r1 = np.sqrt(rng.random(count))[:, None]
    r2 = rng.random(count)[:, None]
    pts = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c
    normals = mesh.normals()[tri_idx]
    return PointCloud(pts, normals, viewpoint=None)


def _require_positive(**dims: float) -> None:
    for name, value in dims.items():
        if not value > 0:
            raise InvalidSpec(f"{name} must be positive, got {value}")
