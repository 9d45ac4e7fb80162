import math

import numpy as np
import pytest
from scipy import stats

from graspfind.rng import Rng
from graspfind.se3 import (
    Pose,
    look_at_rotation,
    random_perturbation,
    rotation_about_axis,
    sample_sphere_viewpoints,
)


def test_identity_compose():
    eye = Pose.identity()
    out = eye.compose(eye)
    np.testing.assert_allclose(out.rotation, np.eye(3))
    np.testing.assert_allclose(out.translation, 0.0)


def test_transform_identity():
    assert np.allclose(Pose.identity().transform(np.array([1.0, 2.0, 3.0])), [1, 2, 3])


def test_rz_composition():
    rz90 = Pose.from_axis_angle([0, 0, 1], math.pi / 2)
    out = rz90.compose(rz90)
    np.testing.assert_allclose(out.rotation, rotation_about_axis([0, 0, 1], math.pi), atol=1e-12)


def test_compose_invert_is_identity():
    rng = Rng(11)
    for _ in range(20):
        p = Pose(rotation_about_axis(rng.unit_vector(), rng.uniform(0, 3)), rng.normal(size=3))
        round_trip = p.compose(p.invert())
        assert np.abs(round_trip.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(round_trip.translation).max() < 1e-9


def test_transform_distributes_over_compose():
    rng = Rng(12)
    a = Pose(rotation_about_axis(rng.unit_vector(), 1.1), rng.normal(size=3))
    b = Pose(rotation_about_axis(rng.unit_vector(), 0.4), rng.normal(size=3))
    pts = rng.normal(size=(50, 3))
    np.testing.assert_allclose(
        a.compose(b).transform(pts), a.transform(b.transform(pts)), atol=1e-12
    )


def test_invalid_rotation_rejected():
    bad = np.eye(3)
    bad[0, 0] = 1.001
    with pytest.raises(ValueError):
        Pose(bad, np.zeros(3))
    with pytest.raises(ValueError):
        Pose(-np.eye(3), np.zeros(3))  # det -1


def test_million_compositions_stay_orthonormal():
    # long chains must not drift; compose re-orthonormalizes past 1e-7
    rng = Rng(13)
    deltas = [
        Pose(rotation_about_axis(rng.unit_vector(), rng.uniform(0, 0.5)), np.zeros(3))
        for _ in range(64)
    ]
    acc = Pose.identity()
    for i in range(1_000_000):
        acc = acc.compose(deltas[i % 64])
    drift = np.abs(acc.rotation.T @ acc.rotation - np.eye(3)).max()
    assert drift < 1e-9
    assert abs(np.linalg.det(acc.rotation) - 1.0) < 1e-9


def test_look_at_rotation_conventions():
    r = look_at_rotation(np.array([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(r[:, 2], [0, 1, 0], atol=1e-12)
    # up column is world +z projected
    np.testing.assert_allclose(r[:, 1], [0, 0, 1], atol=1e-12)
    np.testing.assert_allclose(np.cross(r[:, 0], r[:, 1]), r[:, 2], atol=1e-12)
    # looking along z falls back to +x reference
    r2 = look_at_rotation(np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(r2[:, 1], [1, 0, 0], atol=1e-12)


class TestSphereViewpoints:
    def test_count_and_radius(self):
        poses = sample_sphere_viewpoints(Rng(1), 20, 0.5)
        assert len(poses) == 20
        for p in poses:
            assert abs(np.linalg.norm(p.translation) - 0.5) < 1e-9

    def test_optical_axis_points_at_origin(self):
        for p in sample_sphere_viewpoints(Rng(2), 10, 0.5):
            fwd = p.rotation[:, 2]
            np.testing.assert_allclose(fwd, -p.translation / 0.5, atol=1e-9)

    def test_deterministic(self):
        a = sample_sphere_viewpoints(Rng(7), 1, 0.5)[0]
        b = sample_sphere_viewpoints(Rng(7), 1, 0.5)[0]
        assert np.array_equal(a.rotation, b.rotation)
        assert np.array_equal(a.translation, b.translation)

    def test_mean_near_origin(self):
        poses = sample_sphere_viewpoints(Rng(3), 10_000, 0.5)
        mean = np.mean([p.translation for p in poses], axis=0)
        assert np.linalg.norm(mean) < 0.02

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            sample_sphere_viewpoints(Rng(0), 1, 0.0)


class TestRandomPerturbation:
    def test_zero_magnitudes_give_identity(self):
        p = random_perturbation(Rng(5), 0.0, 0.0)
        np.testing.assert_allclose(p.rotation, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(p.translation, 0.0)

    def test_bounds_respected(self):
        rng = Rng(6)
        for _ in range(500):
            p = random_perturbation(rng, 5.0, 0.003)
            angle = math.degrees(math.acos(np.clip((np.trace(p.rotation) - 1) / 2, -1, 1)))
            assert angle <= 5.0 + 1e-9
            assert np.linalg.norm(p.translation) <= 0.003 + 1e-12

    def test_angle_distribution_uniform(self):
        rng = Rng(8)
        angles = []
        for _ in range(10_000):
            p = random_perturbation(rng, 5.0, 0.003)
            angles.append(math.degrees(math.acos(np.clip((np.trace(p.rotation) - 1) / 2, -1, 1))))
        result = stats.kstest(angles, stats.uniform(loc=0.0, scale=5.0).cdf)
        assert result.pvalue > 0.01
