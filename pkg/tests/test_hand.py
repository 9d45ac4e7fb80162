import math

import numpy as np
import pytest

from bruteforce import bf_in_collision, bf_push_forward, bf_region_mask
from graspfind.cloud import PointCloud
from graspfind.hand import (
    HandGeometry,
    build_orientation_grid,
    center_laterally,
    closing_region_points,
    grasp_pose,
    hand_occupancy,
    in_collision,
    push_forward,
)
from graspfind.rng import Rng
from graspfind.se3 import Pose, rotation_about_axis

HAND = HandGeometry()


def random_pose(rng):
    return Pose(
        rotation_about_axis(rng.unit_vector(), rng.uniform(0, math.pi)),
        rng.uniform(-0.05, 0.05, 3),
    )


def test_hand_geometry_validation():
    with pytest.raises(ValueError):
        HandGeometry(finger_length=0.0)
    with pytest.raises(ValueError):
        HandGeometry(max_aperture=0.015, finger_thickness=0.01)


class TestOrientationGrid:
    def test_grid_size_is_196(self):
        grid = build_orientation_grid()
        assert grid.m == 196
        assert grid.n_axes == 49 and grid.n_rolls == 4

    def test_axis_zero_equals_camera_axis(self):
        axis = np.array([0.1, -0.4, 0.9])
        grid = build_orientation_grid(axis)
        np.testing.assert_array_equal(grid.axes[0], grid.camera_axis)
        assert np.abs(grid.axes[0] - axis / np.linalg.norm(axis)).max() < 1e-12

    def test_axes_face_camera_halfdome(self):
        grid = build_orientation_grid()
        assert (grid.axes @ grid.camera_axis >= -1e-12).all()
        assert np.abs(np.linalg.norm(grid.axes, axis=1) - 1).max() < 1e-9

    def test_axes_pairwise_distinct(self):
        grid = build_orientation_grid()
        dots = np.clip(grid.axes @ grid.axes.T, -1, 1)
        np.fill_diagonal(dots, -1)
        assert np.degrees(np.arccos(dots.max())) > 1.0

    def test_rotational_coverage_under_20_degrees(self):
        grid = build_orientation_grid()
        rng = Rng(14)
        worst = 0.0
        for _ in range(3000):
            u = rng.unit_vector()
            u[2] = abs(u[2])
            u /= np.linalg.norm(u)
            best = np.degrees(np.arccos(np.clip(grid.axes @ u, -1, 1))).min()
            worst = max(worst, best)
        assert worst < 20.0

    def test_encode_decode_roundtrip(self):
        grid = build_orientation_grid()
        for i in (0, 3, 4, 97, 195):
            axis_i, roll_i = grid.decode(i)
            assert grid.encode(axis_i, roll_i) == i
        with pytest.raises(IndexError):
            grid.decode(196)

    def test_rotation_columns_are_proper_frame(self):
        grid = build_orientation_grid()
        for i in range(0, 196, 17):
            r = grid.rotation(i)
            axis_i, _ = grid.decode(i)
            np.testing.assert_allclose(r[:, 2], grid.axes[axis_i], atol=1e-12)
            np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
            np.testing.assert_allclose(np.cross(r[:, 0], r[:, 1]), r[:, 2], atol=1e-12)

    def test_rolls_90_apart_give_orthogonal_closing(self):
        grid = build_orientation_grid()
        r0 = grid.rotation(grid.encode(5, 0))
        r2 = grid.rotation(grid.encode(5, 2))  # rolls are 45 deg apart
        assert abs(r0[:, 0] @ r2[:, 0]) < 1e-12

    def test_serialization_roundtrip(self):
        grid = build_orientation_grid(np.array([0, 1.0, 0]), 25, 4, 75.0)
        from graspfind.hand import OrientationGrid

        back = OrientationGrid.from_dict(grid.to_dict())
        np.testing.assert_allclose(back.axes, grid.axes, atol=1e-15)


class TestGraspPose:
    def test_centroid_at_sample(self):
        grid = build_orientation_grid()
        pose = grasp_pose(np.array([0.01, 0.02, 0.03]), grid, 0, HAND)
        np.testing.assert_allclose(pose.translation, [0.01, 0.02, 0.03], atol=1e-15)

    def test_occupancy_boxes(self):
        pose = Pose.identity()
        fingers_and_base = hand_occupancy(pose, HAND, aperture=0.06)
        f1, f2, base = fingers_and_base
        # inner faces separated by exactly the aperture along closing axis x
        inner1 = f1.center[0] - f1.half_extents[0]
        inner2 = f2.center[0] + f2.half_extents[0]
        assert abs((inner1 - inner2) - 0.06) < 1e-12
        # identity pose: boxes axis-aligned
        for box in fingers_and_base:
            np.testing.assert_array_equal(box.rotation, np.eye(3))
        # midpoint between fingers is inside no box
        assert not any(box.contains(np.zeros(3))[0] for box in fingers_and_base)


class TestInCollision:
    def test_empty_cloud(self):
        assert not in_collision(PointCloud(np.zeros((0, 3))), Pose.identity(), HAND)

    def test_point_at_finger_center(self):
        boxes = hand_occupancy(Pose.identity(), HAND)
        cloud = PointCloud(boxes[0].center[None, :])
        assert in_collision(cloud, Pose.identity(), HAND)

    def test_cube_face_on_with_open_hand_is_free(self):
        rng = Rng(15)
        pts = rng.uniform(-0.02, 0.02, (3000, 3))
        for axis in range(3):
            for sign in (-1, 1):
                face = pts.copy()
                face[:, axis] = 0.02 * sign
                cloud = PointCloud(face) if axis == 0 and sign == -1 else PointCloud(
                    np.vstack([face])
                )
        # full cube surface
        surface = []
        for axis in range(3):
            for sign in (-1, 1):
                face = rng.uniform(-0.02, 0.02, (500, 3))
                face[:, axis] = 0.02 * sign
                surface.append(face)
        cloud = PointCloud(np.vstack(surface))
        # hand approaches along -z, closing across x, region centered at cube center
        pose = Pose(np.diag([1.0, -1.0, -1.0]), np.array([0.0, 0.0, 0.001]))
        assert not in_collision(cloud, pose, HAND, aperture=0.085)
        assert bf_in_collision(cloud.points, pose.rotation, pose.translation, HAND) is False

    def test_matches_brute_force_on_random_poses(self):
        rng = Rng(16)
        pts = rng.uniform(-0.06, 0.06, (2000, 3))
        cloud = PointCloud(pts)
        for _ in range(200):
            pose = random_pose(rng)
            assert in_collision(cloud, pose, HAND) == bf_in_collision(
                pts, pose.rotation, pose.translation, HAND
            )

    def test_monotone_in_points(self):
        rng = Rng(17)
        pts = rng.uniform(-0.05, 0.05, (500, 3))
        cloud_small = PointCloud(pts[:250])
        cloud_big = PointCloud(pts)
        for _ in range(50):
            pose = random_pose(rng)
            if in_collision(cloud_small, pose, HAND):
                assert in_collision(cloud_big, pose, HAND)


class TestClosingRegion:
    def test_centroid_point_included(self):
        cloud = PointCloud(np.zeros((1, 3)))
        assert list(closing_region_points(cloud, Pose.identity(), HAND)) == [0]

    def test_boundary_just_outside_finger_length(self):
        eps = 1e-9
        inside = np.array([[0.0, 0.0, HAND.finger_length / 2 - eps]])
        outside = np.array([[0.0, 0.0, HAND.finger_length / 2 + eps]])
        assert len(closing_region_points(PointCloud(inside), Pose.identity(), HAND)) == 1
        assert len(closing_region_points(PointCloud(outside), Pose.identity(), HAND)) == 0

    def test_matches_brute_force(self):
        rng = Rng(18)
        pts = rng.uniform(-0.08, 0.08, (1000, 3))
        cloud = PointCloud(pts)
        for _ in range(50):
            pose = random_pose(rng)
            got = set(closing_region_points(cloud, pose, HAND))
            want = set(np.nonzero(bf_region_mask(pts, pose.rotation, pose.translation, HAND))[0])
            assert got == want


class TestPushForward:
    def test_empty_cloud_returns_none(self):
        assert push_forward(PointCloud(np.zeros((0, 3))), Pose.identity(), HAND) is None

    def test_wall_patch_advances_until_base_contact(self):
        # bounded wall patch narrower than the aperture, perpendicular to approach
        rng = Rng(19)
        wall = np.column_stack(
            [rng.uniform(-0.03, 0.03, 400), rng.uniform(-0.03, 0.03, 400),
             np.full(400, 0.00031)]
        )
        cloud = PointCloud(wall)
        pose = Pose(np.diag([1.0, -1.0, -1.0]), np.array([0.00013, 0.00047, 0.0779]))
        step = 0.002
        result = push_forward(cloud, pose, HAND, step)
        assert result is not None
        assert not in_collision(cloud, result, HAND)
        assert len(closing_region_points(cloud, result, HAND)) >= 1
        # one further step collides (base plate reaches the wall)
        deeper = Pose(result.rotation, result.translation + step * result.rotation[:, 2])
        assert in_collision(cloud, deeper, HAND)

    def test_matches_brute_force_line_search(self):
        rng = Rng(20)
        pts = rng.uniform(-0.05, 0.05, (600, 3))
        cloud = PointCloud(pts)
        hits = 0
        for _ in range(100):
            pose = random_pose(rng)
            got = push_forward(cloud, pose, HAND, 0.002)
            want = bf_push_forward(pts, pose.rotation, pose.translation, HAND, 0.002)
            if got is None:
                assert want is None
            else:
                hits += 1
                np.testing.assert_allclose(got.translation, want, atol=1e-9)
        assert hits > 20  # the comparison actually exercised pushes

    def test_result_region_nonempty_postcondition(self):
        rng = Rng(22)
        pts = rng.uniform(-0.04, 0.04, (300, 3))
        cloud = PointCloud(pts)
        for _ in range(50):
            pose = random_pose(rng)
            result = push_forward(cloud, pose, HAND, 0.002)
            if result is not None:
                assert len(closing_region_points(cloud, result, HAND)) >= 1
                assert not in_collision(cloud, result, HAND)

    def test_step_validation(self):
        cloud = PointCloud(np.zeros((1, 3)))
        with pytest.raises(ValueError):
            push_forward(cloud, Pose.identity(), HAND, step=HAND.base_depth)


class TestCenterLaterally:
    def test_empty_region_unchanged(self):
        cloud = PointCloud(np.array([[1.0, 1.0, 1.0]]))
        pose = Pose.identity()
        out = center_laterally(cloud, pose, HAND)
        np.testing.assert_array_equal(out.translation, pose.translation)

    def test_symmetric_pair_unchanged(self):
        cloud = PointCloud(np.array([[0.01, 0.0, 0.0], [-0.01, 0.0, 0.0]]))
        out = center_laterally(cloud, Pose.identity(), HAND)
        np.testing.assert_allclose(out.translation, 0.0, atol=1e-15)

    def test_offset_points_shift_pose(self):
        cloud = PointCloud(np.array([[0.005, 0.0, 0.0], [0.005, 0.001, 0.002]]))
        out = center_laterally(cloud, Pose.identity(), HAND)
        np.testing.assert_allclose(out.translation, [0.005, 0.0, 0.0], atol=1e-12)
