import math

import numpy as np
import pytest

from autocal import lidar_imu, synth
from autocal.cloud import PointCloud
from autocal.errors import (DegenerateMotion, EmptyFeature,
                            InsufficientFeatures)
from autocal.geom import Pose, Rotation
from autocal.lidar_imu import StampedPose

X_TRUE = Pose(Rotation.from_euler_zyx(math.radians(5), math.radians(-2),
                                      math.radians(3)), [0.9, -0.2, 0.4])
BEAM = synth.LidarBeamModel(rings=14, azimuth_steps=110, fov_up_deg=8,
                            fov_down_deg=-20)


def figure_eight_rig(duration=24.0):
    tr = synth.gen_trajectory("figure_eight", duration=duration, scale=10.0,
                              bank_gain=0.7)
    return tr


def room_frames(imu_track, pts=350, lidar_stride=10):
    scene = synth.room_scene()
    rng = np.random.default_rng(0)
    frames = []
    for k in range(0, len(imu_track), lidar_stride):
        sp = imu_track[k]
        cloud = synth.sample_lidar(scene, sp.pose @ X_TRUE, BEAM, seed=k)
        if len(cloud) > pts:
            cloud = cloud.select(rng.choice(len(cloud), pts, replace=False))
        frames.append((sp.stamp, cloud))
    return frames


class TestPlaneCost:
    def test_points_on_plane(self):
        rng = np.random.default_rng(0)
        xy = rng.uniform(-2, 2, size=(50, 2))
        pts = np.column_stack([xy, np.zeros(50)])
        assert lidar_imu.plane_cost(pts, [0, 0, 1], [0.3, -0.2, 0]) == 0.0

    def test_single_point_hand_value(self):
        # one point 0.2 m off the plane: cost = 0.2^2 = 0.04
        assert lidar_imu.plane_cost([[0, 0, 0.2]], [0, 0, 1],
                                    [0, 0, 0]) == pytest.approx(0.04)

    def test_empty(self):
        with pytest.raises(EmptyFeature):
            lidar_imu.plane_cost(np.zeros((0, 3)), [0, 0, 1], [0, 0, 0])

    def test_min_equals_smallest_eigenvalue(self):
        # eigen-decomposition oracle over 50 random sets
        rng = np.random.default_rng(1)
        for _ in range(50):
            pts = rng.normal(size=(rng.integers(10, 40), 3)) * [2, 1, 0.1]
            c = pts.mean(axis=0)
            q = pts - c
            w, v = np.linalg.eigh(q.T @ q / len(pts))
            cost = lidar_imu.plane_cost(pts, v[:, 0], c)
            assert abs(cost - w[0]) < 1e-9

    def test_rigid_invariance(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(30, 3)) * [2, 1, 0.05]
        n = np.array([0.0, 0.0, 1.0])
        q = np.array([0.1, 0.2, 0.0])
        c0 = lidar_imu.plane_cost(pts, n, q)
        for _ in range(10):
            pose = Pose(Rotation.from_rotvec(rng.normal(size=3)),
                        rng.normal(size=3))
            c1 = lidar_imu.plane_cost(pose.transform(pts),
                                      pose.rotation.apply(n),
                                      pose.transform(q))
            assert abs(c0 - c1) < 1e-9


class TestAdaptiveVoxelize:
    def test_two_perpendicular_walls(self):
        rng = np.random.default_rng(3)
        wall1 = np.column_stack([rng.uniform(0, 3, 3000),
                                 rng.uniform(0, 3, 3000),
                                 np.zeros(3000)])
        wall2 = np.column_stack([np.zeros(3000),
                                 rng.uniform(0, 3, 3000),
                                 rng.uniform(0, 3, 3000)])
        feats = lidar_imu.adaptive_voxelize(
            PointCloud(np.vstack([wall1, wall2])))
        planes = [f for f in feats if f.kind == "plane"]
        assert len(planes) >= 2
        for f in planes:
            ang_z = math.degrees(math.acos(min(abs(f.n @ [0, 0, 1]), 1)))
            ang_x = math.degrees(math.acos(min(abs(f.n @ [1, 0, 0]), 1)))
            assert min(ang_z, ang_x) < 1.0

    def test_uniform_volume_no_features(self):
        # volume-filling random points: every eigenvalue the same order, so
        # neither the plane nor the edge ratio can fire at any level
        # (a ball's thin boundary caps would be genuinely plane-like, so the
        # region is aligned with the voxel lattice)
        rng = np.random.default_rng(4)
        pts = rng.uniform(0, 3, size=(6000, 3))
        feats = lidar_imu.adaptive_voxelize(PointCloud(pts))
        assert feats == []

    def test_flat_floor_normals(self):
        rng = np.random.default_rng(5)
        pts = np.column_stack([rng.uniform(-4, 4, 5000),
                               rng.uniform(-4, 4, 5000),
                               np.zeros(5000)])
        feats = lidar_imu.adaptive_voxelize(PointCloud(pts))
        planes = [f for f in feats if f.kind == "plane"]
        assert planes
        for f in planes:
            assert abs(abs(f.n @ [0, 0, 1]) - 1) < 1e-6

    def test_eigenvalue_ratio_invariants(self):
        rng = np.random.default_rng(6)
        pts = np.vstack([
            np.column_stack([rng.uniform(0, 4, 4000),
                             rng.uniform(0, 4, 4000),
                             rng.normal(0, 0.005, 4000)]),
            rng.uniform(0, 4, size=(1500, 3)),
        ])
        for f in lidar_imu.adaptive_voxelize(PointCloud(pts)):
            lam1, lam2, lam3 = f.eigenvalues
            assert abs(np.linalg.norm(f.n) - 1) < 1e-9
            if f.kind == "plane":
                assert lam3 / max(lam2, 1e-300) < lidar_imu.PLANE_RATIO
            else:
                assert lam2 / max(lam1, 1e-300) < lidar_imu.EDGE_RATIO


class TestHandeyeInit:
    def test_noiseless_exact(self):
        tr = figure_eight_rig()
        x = lidar_imu.handeye_init(tr.poses, tr.sensor_track(X_TRUE))
        assert x.rotation.angle_to(X_TRUE.rotation) < 1e-6
        assert np.linalg.norm(x.translation - X_TRUE.translation) < 1e-6

    def test_straight_line_degenerate(self):
        tr = synth.gen_trajectory("straight", duration=5.0)
        with pytest.raises(DegenerateMotion):
            lidar_imu.handeye_init(tr.poses, tr.sensor_track(X_TRUE))

    def test_noise_monte_carlo(self):
        tr = figure_eight_rig()
        lt = tr.sensor_track(X_TRUE)
        for seed in range(3):
            rng = np.random.default_rng(100 + seed)
            noisy = [StampedPose(s.stamp,
                                 Pose(s.pose.rotation,
                                      s.pose.translation
                                      + rng.normal(0, 0.01, 3)))
                     for s in lt]
            x = lidar_imu.handeye_init(tr.poses, noisy)
            assert math.degrees(x.rotation.angle_to(X_TRUE.rotation)) < 1.0
            assert np.linalg.norm(x.translation - X_TRUE.translation) < 0.05


class TestWindowedCalibrate:
    def test_recovery_from_perturbed_init(self):
        tr = figure_eight_rig()
        frames = room_frames(tr.poses)
        init = Pose(X_TRUE.rotation @ Rotation.from_rotvec(
            [0.02, -0.02, 0.015]),
            X_TRUE.translation + [0.05, -0.06, 0.05])
        res = lidar_imu.calibrate(tr.poses, frames, init)
        e = res.pose
        assert math.degrees(e.rotation.angle_to(X_TRUE.rotation)) < 0.5
        assert np.linalg.norm(e.translation - X_TRUE.translation) < 0.05

    def test_truth_is_fixed_point(self):
        tr = figure_eight_rig()
        frames = room_frames(tr.poses)
        res = lidar_imu.calibrate(tr.poses, frames, X_TRUE)
        n_windows = len(res.residuals["window_costs"])
        drift_deg = math.degrees(res.pose.rotation.angle_to(X_TRUE.rotation))
        assert drift_deg / n_windows < 1e-4
        assert np.linalg.norm(res.pose.translation
                              - X_TRUE.translation) < 1e-4

    def test_featureless_scene(self):
        tr = figure_eight_rig(duration=6.0)
        rng = np.random.default_rng(7)
        frames = [(s.stamp, PointCloud(rng.uniform(-10, 10, size=(300, 3))))
                  for s in tr.poses[::10]]
        with pytest.raises(InsufficientFeatures):
            lidar_imu.calibrate(tr.poses, frames, X_TRUE)
