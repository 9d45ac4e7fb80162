import numpy as np
import pytest

from graspfind.cloud import PointCloud, SpatialIndex, estimate_normals
from graspfind.rng import Rng
from graspfind.se3 import Pose, rotation_about_axis


def grid_cloud(n=10, spacing=0.01, viewpoint=(0, 0, 1.0)):
    xs, ys = np.meshgrid(np.arange(n) * spacing, np.arange(n) * spacing)
    pts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(n * n)])
    pts -= pts.mean(axis=0)
    return PointCloud(pts, viewpoint=np.array(viewpoint, dtype=np.float64))


def test_pointcloud_validates_normals():
    pts = np.zeros((2, 3))
    with pytest.raises(ValueError):
        PointCloud(pts, normals=np.array([[1.0, 0, 0], [2.0, 0, 0]]))


def test_pointcloud_validates_orientation():
    pts = np.array([[0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        PointCloud(pts, normals=np.array([[0.0, 0, -1.0]]), viewpoint=np.array([0, 0, 1.0]))
    # fine without a viewpoint (mesh-sampled surfaces)
    PointCloud(pts, normals=np.array([[0.0, 0, -1.0]]))


def test_spatial_index_matches_brute_force():
    rng = Rng(21)
    pts = rng.uniform(-1, 1, (1000, 3))
    index = SpatialIndex(pts)
    for _ in range(50):
        center = rng.uniform(-1, 1, 3)
        radius = float(rng.uniform(0.05, 0.8))
        expected = set(np.nonzero(np.linalg.norm(pts - center, axis=1) <= radius)[0])
        assert set(index.radius(center, radius)) == expected


def test_knn_counts_and_order():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]])
    d, i = SpatialIndex(pts).knn(np.array([0.1, 0, 0]), 2)
    assert list(i) == [0, 1]
    assert d[0] < d[1]


class TestEstimateNormals:
    def test_planar_grid_faces_viewpoint(self):
        cloud = estimate_normals(grid_cloud(viewpoint=(0, 0, 1.0)), k=8)
        np.testing.assert_allclose(cloud.normals, np.tile([0, 0, 1.0], (len(cloud), 1)), atol=1e-9)

    def test_sign_flip_with_viewpoint_below(self):
        cloud = estimate_normals(grid_cloud(viewpoint=(0, 0, -1.0)), k=8)
        np.testing.assert_allclose(cloud.normals, np.tile([0, 0, -1.0], (len(cloud), 1)), atol=1e-9)

    def test_sphere_normals_near_radial(self):
        # unit sphere, dense enough that 10-NN patches are nearly flat
        rng = Rng(31)
        dirs = rng.normal(size=(5000, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        viewpoint = np.array([0, 0, 10.0])
        cloud = estimate_normals(PointCloud(dirs, viewpoint=viewpoint), k=10, radius=0.01)
        # radial up to the viewpoint-facing sign flip
        cos = np.abs(np.einsum("ij,ij->i", cloud.normals, dirs))
        assert np.degrees(np.arccos(np.clip(cos, -1, 1))).max() < 5.0

    def test_rigid_invariance(self):
        base = grid_cloud()
        move = Pose(rotation_about_axis([1, 1, 0.3], 0.8), np.array([0.2, -0.1, 0.4]))
        a = estimate_normals(base, k=8)
        b = estimate_normals(base.transformed(move), k=8)
        np.testing.assert_allclose(b.normals, a.transformed(move).normals, atol=1e-6)

    def test_collinear_points_flagged(self):
        pts = np.column_stack([np.linspace(0, 0.1, 30), np.zeros(30), np.zeros(30)])
        viewpoint = np.array([0, 0, 1.0])
        cloud, flags = estimate_normals(
            PointCloud(pts, viewpoint=viewpoint), k=5, return_flags=True
        )
        assert flags.all()
        expected = viewpoint - pts
        expected /= np.linalg.norm(expected, axis=1, keepdims=True)
        np.testing.assert_allclose(cloud.normals, expected, atol=1e-9)

    def test_requires_viewpoint(self):
        with pytest.raises(ValueError):
            estimate_normals(PointCloud(np.zeros((5, 3))))
