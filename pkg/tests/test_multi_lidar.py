import math

import numpy as np
import pytest

from autocal import multi_lidar as ml, synth
from autocal.cloud import PointCloud, octree_volume
from autocal.errors import DegenerateNormals, EmptyNonGround, \
    NoCorrespondences, NoPlane
from autocal.geom import Pose, Rotation

BEAM = synth.LidarBeamModel(rings=24, azimuth_steps=600, fov_up_deg=10,
                            fov_down_deg=-24)


def scene_clouds(offset: Pose, seed=3):
    scene = synth.urban_scene(seed=seed)
    master_pose = Pose(Rotation.identity(), [0, 0, 1.8])
    slave_pose = master_pose @ offset
    master = synth.sample_lidar(scene, master_pose, BEAM, seed=1)
    slave = synth.sample_lidar(scene, slave_pose, BEAM, seed=2)
    return master, slave


class TestGroundAlign:
    def test_identical_planes(self):
        rng = np.random.default_rng(0)
        xy = rng.uniform(-10, 10, size=(500, 2))
        cloud = PointCloud(np.column_stack([xy, rng.normal(0, 0.001, 500)]))
        gs = ml.split_ground(cloud, 0.02)
        pose = ml.ground_align(gs.plane, gs.plane, cloud, 0.02)
        assert math.degrees(pose.rotation.angle_to(Rotation.identity())) \
            < 1e-6
        assert abs(pose.translation[2]) < 1e-9

    def test_five_degree_tilt(self):
        # constructed rotation oracle: slave points tilted 5 deg about x
        rng = np.random.default_rng(1)
        xy = rng.uniform(-10, 10, size=(2000, 2))
        ground = np.column_stack([xy, np.zeros(2000)])
        tilt = Pose(Rotation.from_euler_zyx(0, 0, math.radians(5)),
                    np.zeros(3))
        master = PointCloud(ground)
        slave = PointCloud(tilt.inverse().transform(ground))
        gm = ml.split_ground(master, 0.02).plane
        gsl = ml.split_ground(slave, 0.02)
        pose = ml.ground_align(gm, gsl.plane, slave, 0.02)
        y, p, r = pose.rotation.as_euler_zyx()
        assert abs(math.degrees(r) - 5.0) < 0.01

    def test_flipped_normal_same_result(self):
        rng = np.random.default_rng(2)
        xy = rng.uniform(-10, 10, size=(1000, 2))
        cloud = PointCloud(np.column_stack([xy, np.zeros(1000)]))
        gs = ml.split_ground(cloud, 0.02)
        pose_a = ml.ground_align(gs.plane, gs.plane, cloud, 0.02)
        pose_b = ml.ground_align(gs.plane, gs.plane.flipped(), cloud, 0.02)
        assert np.allclose(pose_a.as_matrix(), pose_b.as_matrix(), atol=1e-9)


class TestYawXySearch:
    def test_recovers_three_degree_yaw(self):
        master, _ = scene_clouds(Pose.identity())
        gs = ml.split_ground(master, 0.05)
        ng = gs.non_ground
        sensor_yaw = Pose(Rotation.from_euler_zyx(math.radians(3), 0, 0),
                          np.zeros(3))
        slave_ng = ng.transformed(sensor_yaw.inverse())
        grid = ml.SearchGrid(yaw_range_deg=10, yaw_step_deg=1.0,
                             xy_range_m=1.0, xy_step_m=0.25)
        yaw, x, y = ml.yaw_xy_search(ng, slave_ng, grid)
        assert abs(math.degrees(yaw) - 3.0) <= 0.25
        assert math.hypot(x, y) < 0.15

    def test_identical_clouds(self):
        master, _ = scene_clouds(Pose.identity())
        ng = ml.split_ground(master, 0.05).non_ground
        yaw, x, y = ml.yaw_xy_search(ng, ng, ml.SearchGrid(
            yaw_range_deg=5, yaw_step_deg=0.5, xy_range_m=0.5, xy_step_m=0.1))
        assert abs(yaw) < 1e-9 and abs(x) < 1e-9 and abs(y) < 1e-9

    def test_empty(self):
        master, _ = scene_clouds(Pose.identity())
        ng = ml.split_ground(master, 0.05).non_ground
        with pytest.raises(EmptyNonGround):
            ml.yaw_xy_search(ng, PointCloud(np.zeros((0, 3))),
                             ml.SearchGrid())


class TestIcpRefine:
    def test_two_samplings_converge(self):
        offset = Pose(Rotation.identity(), np.zeros(3))
        master, slave = scene_clouds(offset)
        mg = ml.split_ground(master, 0.05)
        sg = ml.split_ground(slave, 0.05)
        init = Pose(Rotation.from_euler_zyx(math.radians(1), 0, 0),
                    [0.1, 0.05, 0.02])
        pose = ml.icp_refine(mg.non_ground, sg.non_ground, init)
        assert math.degrees(pose.rotation.angle_to(Rotation.identity())) \
            < 0.05
        assert np.linalg.norm(pose.translation) < 0.01

    def test_truth_init_converges_fast(self):
        master, slave = scene_clouds(Pose.identity())
        mg = ml.split_ground(master, 0.05)
        sg = ml.split_ground(slave, 0.05)
        rms0 = ml.point_to_plane_rms(mg.non_ground, sg.non_ground,
                                     Pose.identity())
        pose = ml.icp_refine(mg.non_ground, sg.non_ground, Pose.identity(),
                             max_iters=2)
        rms1 = ml.point_to_plane_rms(mg.non_ground, sg.non_ground, pose)
        assert rms1 <= rms0 + 1e-12
        assert math.degrees(pose.rotation.angle_to(Rotation.identity())) \
            < 0.05

    def test_disjoint_clouds(self):
        rng = np.random.default_rng(5)
        a = PointCloud(rng.uniform(0, 5, size=(200, 3)))
        b = PointCloud(rng.uniform(50, 55, size=(200, 3)))
        with pytest.raises(NoCorrespondences):
            ml.icp_refine(a, b, Pose.identity(), gate=1.0)


class TestOctreeRefine:
    def test_never_worse_than_init(self):
        offset = Pose(Rotation.from_euler_zyx(math.radians(0.4), 0, 0),
                      [0.03, -0.02, 0.01])
        master, slave = scene_clouds(Pose.identity())
        pose, v0, v1 = ml.octree_refine(master, slave, offset)
        assert v1 <= v0

    def test_aligned_init_stays_close(self):
        master, slave = scene_clouds(Pose.identity())
        pose, v0, v1 = ml.octree_refine(master, slave, Pose.identity())
        assert math.degrees(pose.rotation.angle_to(Rotation.identity())) \
            <= 0.5
        assert np.abs(pose.translation).max() <= 0.05


class TestCalibratePair:
    TRUE = Pose(Rotation.from_euler_zyx(math.radians(10), 0, 0),
                [1.2, 0.3, 0.2])

    def test_full_pipeline(self):
        master, slave = scene_clouds(self.TRUE)
        res = ml.calibrate_pair(master, slave, eps=0.05)
        e = res.pose
        assert math.degrees(e.rotation.angle_to(self.TRUE.rotation)) < 0.3
        assert np.linalg.norm(e.translation - self.TRUE.translation) < 0.05
        assert res.residuals["icp_rms_after"] \
            <= res.residuals["icp_rms_before"]
        assert res.residuals["octree_volume_after"] \
            <= res.residuals["octree_volume_before"]

    def test_identity_for_same_cloud(self):
        master, _ = scene_clouds(Pose.identity())
        res = ml.calibrate_pair(master, master, eps=0.05)
        assert math.degrees(res.pose.rotation.angle_to(
            Rotation.identity())) < 1e-6
        assert np.linalg.norm(res.pose.translation) < 1e-6

    def test_reciprocal_composition(self):
        master, slave = scene_clouds(self.TRUE)
        ab = ml.calibrate_pair(master, slave, eps=0.05).pose
        ba = ml.calibrate_pair(slave, master, eps=0.05, seed=5).pose
        comp = ab @ ba
        assert math.degrees(comp.rotation.angle_to(Rotation.identity())) \
            < 0.6
        assert np.linalg.norm(comp.translation) < 0.1

    def test_no_ground_plane(self):
        rng = np.random.default_rng(9)
        cloud = PointCloud(rng.uniform(-10, 10, size=(1000, 3)))
        with pytest.raises(NoPlane):
            ml.calibrate_pair(cloud, cloud, eps=0.001)

    def test_ground_split_invariant(self):
        master, _ = scene_clouds(Pose.identity())
        gs = ml.split_ground(master, 0.05)
        d = np.abs(gs.plane.distances(gs.ground.xyz))
        assert np.all(d <= 0.05 + 1e-12)
        assert len(gs.ground) + len(gs.non_ground) == len(master)
