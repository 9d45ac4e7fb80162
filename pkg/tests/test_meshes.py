import math

import numpy as np
import pytest
from scipy import stats

from graspfind.io import FormatError, load_mesh, load_obj, load_off, load_ply, save_off, save_ply
from graspfind.cloud import PointCloud
from graspfind.meshes import (
    DegenerateMesh,
    InvalidSpec,
    TriangleMesh,
    PRIMITIVE_KINDS,
    bottle_mesh,
    box_mesh,
    cup_mesh,
    cylinder_mesh,
    random_primitive,
    sample_surface,
    scale_to_extents,
    sphere_mesh,
)
from graspfind.rng import Rng


def test_box_triangle_count_and_volume():
    mesh = box_mesh(0.02, 0.03, 0.05)
    assert len(mesh.triangles) == 12
    assert abs(mesh.volume() - 3e-5) < 1e-9


def test_cylinder_surface_area_within_one_percent():
    mesh = cylinder_mesh(0.02, 0.06, 32)
    analytic = 2 * math.pi * 0.02 * (0.02 + 0.06)
    assert abs(mesh.surface_area() - analytic) / analytic < 0.01


def test_sphere_vertices_on_radius():
    mesh = sphere_mesh(0.03, 3)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.abs(radii - 0.03).max() < 1e-9


def test_primitives_are_watertight():
    # every edge shared by exactly two triangles, opposite winding
    meshes = {
        "box": box_mesh(0.02, 0.02, 0.02),
        "cylinder": cylinder_mesh(0.02, 0.05, 16),
        "sphere": sphere_mesh(0.02, 2),
        "bottle": bottle_mesh(0.02, 0.012, 0.05, 16),
        "cup": cup_mesh(0.03, 0.04, 0.004, 16),
    }
    for name, mesh in meshes.items():
        edges = {}
        for a, b, c in mesh.triangles:
            for u, v in ((a, b), (b, c), (c, a)):
                edges[(u, v)] = edges.get((u, v), 0) + 1
        for (u, v), count in edges.items():
            assert count == 1, f"{name}: duplicate directed edge"
            assert edges.get((v, u), 0) == 1, f"{name}: unmatched edge {(u, v)}"
        assert mesh.volume() > 0, f"{name}: inward winding"


def test_invalid_primitive_dimensions():
    with pytest.raises(InvalidSpec):
        box_mesh(0.0, 0.1, 0.1)
    with pytest.raises(InvalidSpec):
        cylinder_mesh(-0.01, 0.05)
    with pytest.raises(InvalidSpec):
        random_primitive(Rng(0), "torus")


def test_degenerate_triangle_rejected():
    verts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    with pytest.raises(ValueError):
        TriangleMesh(verts, np.array([[0, 1, 2]]))
    with pytest.raises(ValueError):
        TriangleMesh(verts, np.array([[0, 1, 5]]))


class TestScaleToExtents:
    def test_forced_scale(self):
        mesh, factor = scale_to_extents(box_mesh(1.0, 1.0, 1.0), Rng(1), 0.05, 0.05)
        assert abs(mesh.extents().max() - 0.05) < 1e-12
        assert abs(factor - 0.05) < 1e-12
        lo, hi = mesh.bounds()
        np.testing.assert_allclose(lo + hi, 0.0, atol=1e-12)

    def test_range_respected(self):
        rng = Rng(2)
        for _ in range(200):
            mesh, _ = scale_to_extents(box_mesh(0.3, 1.0, 0.7), rng, 0.01, 0.07)
            assert 0.01 - 1e-12 <= mesh.extents().max() <= 0.07 + 1e-12

    def test_extent_distribution_uniform(self):
        rng = Rng(3)
        extents = [
            scale_to_extents(box_mesh(0.3, 1.0, 0.7), rng, 0.01, 0.07)[0].extents().max()
            for _ in range(1000)
        ]
        result = stats.kstest(extents, stats.uniform(loc=0.01, scale=0.06).cdf)
        assert result.pvalue > 0.01


class TestSampleSurface:
    def test_points_inside_single_triangle(self):
        mesh = TriangleMesh(
            np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]), np.array([[0, 1, 2]])
        )
        cloud = sample_surface(mesh, Rng(4), 100)
        # barycentric coordinates nonnegative
        assert (cloud.points[:, 0] >= -1e-12).all()
        assert (cloud.points[:, 1] >= -1e-12).all()
        assert (cloud.points[:, 0] + cloud.points[:, 1] <= 1 + 1e-12).all()
        assert np.abs(cloud.points[:, 2]).max() < 1e-12

    def test_cube_face_counts_area_weighted(self):
        mesh = box_mesh(0.1, 0.1, 0.1)
        cloud = sample_surface(mesh, Rng(5), 60000)
        # 6 faces; classify by dominant normal axis
        for axis in range(3):
            for sign in (-1, 1):
                on_face = (cloud.normals[:, axis] * sign) > 0.5
                count = on_face.sum()
                # multinomial: mean 10000, sigma ~ sqrt(60000 * (1/6)(5/6)) ~ 91
                assert abs(count - 10000) < 3 * 91.3, f"face {axis}{sign}: {count}"

    def test_sphere_normals_radial(self):
        mesh = sphere_mesh(0.03, 3)
        cloud = sample_surface(mesh, Rng(6), 2000)
        radial = cloud.points / np.linalg.norm(cloud.points, axis=1, keepdims=True)
        cos = np.einsum("ij,ij->i", cloud.normals, radial)
        # one mesh-resolution angle: icosphere level 3 edge ~ 8 deg
        assert np.degrees(np.arccos(np.clip(cos, -1, 1))).max() < 8.0

    def test_zero_area_rejected(self):
        mesh = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int32))
        with pytest.raises(DegenerateMesh):
            sample_surface(mesh, Rng(0), 10)


class TestMeshIO:
    def test_off_round_trip(self, tmp_path):
        mesh = random_primitive(Rng(7), "cup")
        path = tmp_path / "m.off"
        save_off(path, mesh)
        back = load_off(path)
        assert len(back.triangles) == len(mesh.triangles)
        assert np.abs(back.vertices - mesh.vertices).max() < 1e-9

    def test_obj_loader(self, tmp_path):
        path = tmp_path / "m.obj"
        path.write_text(
            "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n"
        )
        mesh = load_obj(path)
        assert len(mesh.vertices) == 4
        assert len(mesh.triangles) == 2  # quad fan-triangulated

    def test_load_mesh_dispatch(self, tmp_path):
        with pytest.raises(FormatError):
            load_mesh(tmp_path / "m.stl")

    def test_off_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.off"
        path.write_text("NOT_OFF\n")
        with pytest.raises(FormatError):
            load_off(path)


class TestPlyIO:
    def test_round_trip_with_normals_and_viewpoint(self, tmp_path):
        rng = Rng(8)
        pts = rng.uniform(-0.1, 0.1, (50, 3))
        normals = rng.normal(size=(50, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        viewpoint = np.array([0.0, 0.0, 2.0])
        flip = np.einsum("ij,ij->i", normals, viewpoint[None] - pts) < 0
        normals[flip] = -normals[flip]
        cloud = PointCloud(pts, normals, viewpoint)
        path = tmp_path / "c.ply"
        save_ply(path, cloud)
        back = load_ply(path)
        assert np.abs(back.points - pts).max() < 1e-9
        assert np.abs(back.normals - normals).max() < 1e-7
        np.testing.assert_allclose(back.viewpoint, viewpoint)

    def test_points_only(self, tmp_path):
        cloud = PointCloud(np.zeros((3, 3)))
        save_ply(tmp_path / "c.ply", cloud)
        back = load_ply(tmp_path / "c.ply")
        assert back.normals is None and len(back) == 3

    def test_rejects_non_ply(self, tmp_path):
        (tmp_path / "x.ply").write_text("hello\n")
        with pytest.raises(FormatError):
            load_ply(tmp_path / "x.ply")

    def test_truncated_body_rejected(self, tmp_path):
        text = "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n"
        (tmp_path / "t.ply").write_text(text)
        with pytest.raises(FormatError):
            load_ply(tmp_path / "t.ply")
