import math

import numpy as np
import pytest

from autocal import factory_camera as fc, synth
from autocal.errors import (AboveHorizon, AtInfinity, CollinearPoints,
                            Degenerate, InfeasibleConstraint,
                            ParallelLinesDoNotIntersect)
from autocal.geom import (CameraModel, Homography, Pose, Rotation,
                          apply_homography, fit_homography_dlt, project)

CAM = CameraModel(fx=1100, fy=1100, cx=640, cy=360, width=1280, height=720)
HEIGHT = 1.5
PITCH = math.radians(5.0)


def cam_rig(roll_deg=0.0):
    return synth.camera_mount(pitch=PITCH, roll=math.radians(roll_deg),
                              t=(0.0, 0.0, HEIGHT))


def ground_to_pixel(pose, lon, lat):
    return project(CAM, pose.inverse().transform(np.array([lon, lat, 0.0])))


def true_vp(pose):
    return project(CAM, pose.rotation.inverse().apply([1.0, 0.0, 0.0]))


class TestVanishingPoint:
    def test_identity_homography(self):
        h = Homography(np.eye(3))
        assert np.allclose(fc.vanishing_point(h, (0.0, 0.0)), [0, 0])

    def test_board_homography_gives_principal_point_when_unrotated(self):
        # camera aimed along the axis: vp = principal point
        pose = synth.camera_mount(t=(0.0, 0.0, HEIGHT))
        board_rot = Rotation(np.array([[0.0, 0, 1], [-1, 0, 0], [0, -1, 0]]))
        center = np.array([5.0, 0.4, 1.2])
        board_cam = pose.inverse() @ Pose(board_rot, center)
        bp = np.array([[x, y] for y in (-0.4, 0, 0.4) for x in (-0.6, 0, 0.6)])
        uv = project(CAM, board_cam.transform(
            np.column_stack([bp, np.zeros(len(bp))])))
        h = fit_homography_dlt(bp, uv)
        rel = np.array([0, 0, HEIGHT]) - center
        offsets = (rel @ board_rot.matrix[:, 0], rel @ board_rot.matrix[:, 1])
        vp = fc.vanishing_point(h, offsets)
        assert np.linalg.norm(vp - [CAM.cx, CAM.cy]) < 0.5

    def test_board_homography_matches_projection_oracle(self):
        pose = cam_rig()
        board_rot = Rotation(np.array([[0.0, 0, 1], [-1, 0, 0], [0, -1, 0]]))
        center = np.array([5.0, 0.4, 1.2])
        board_cam = pose.inverse() @ Pose(board_rot, center)
        bp = np.array([[x, y] for y in (-0.4, -0.2, 0, 0.2, 0.4)
                       for x in (-0.6, -0.3, 0, 0.3, 0.6)])
        uv = project(CAM, board_cam.transform(
            np.column_stack([bp, np.zeros(len(bp))])))
        h = fit_homography_dlt(bp, uv)
        rel = np.array([0, 0, HEIGHT]) - center
        offsets = (rel @ board_rot.matrix[:, 0], rel @ board_rot.matrix[:, 1])
        vp = fc.vanishing_point(h, offsets)
        assert np.linalg.norm(vp - true_vp(pose)) < 1e-6

    def test_scale_invariance(self):
        h = Homography(np.array([[2.0, 0.1, 3], [0, 1.5, -2], [0.01, 0, 1]]))
        h2 = Homography(h.matrix * 7.0)
        assert np.allclose(fc.vanishing_point(h, (1.0, 2.0)),
                           fc.vanishing_point(h2, (1.0, 2.0)))

    def test_at_infinity(self):
        h = Homography(np.array([[1.0, 0, 0], [0, 1, 0], [0, -1, 1]]))
        with pytest.raises(AtInfinity):
            fc.vanishing_point(h, (0.0, 1.0))


class TestRangePoint:
    def test_hand_formula(self):
        # 1.5 * 1000 / 100 = 15 m
        cam = CameraModel(fx=1000, fy=1000, cx=640, cy=360,
                          width=1280, height=720)
        model = fc.RangingModel(cam=cam, height=1.5, vp=np.array([640.0, 200.0]))
        d_lon, d_lat = fc.range_point(model, (640.0, 300.0))
        assert d_lon == pytest.approx(15.0)
        assert d_lat == pytest.approx(0.0)

    def test_above_horizon(self):
        model = fc.RangingModel(cam=CAM, height=1.5, vp=np.array([640.0, 300.0]))
        with pytest.raises(AboveHorizon):
            fc.range_point(model, (640.0, 300.0))

    def test_accuracy_on_flat_ground(self):
        pose = cam_rig()
        model = fc.RangingModel(cam=CAM, height=HEIGHT, vp=true_vp(pose))
        for lon, lat in ((20.0, 0.0), (20.0, 4.0), (10.0, -2.0)):
            px = ground_to_pixel(pose, lon, lat)
            d_lon, d_lat = fc.range_point(model, px)
            assert abs(d_lon - lon) / lon < 0.02
            assert abs(d_lat - lat) < 0.02 * lon


class TestGroundHomography:
    def setup_method(self):
        self.pose = cam_rig()
        self.model = fc.RangingModel(cam=CAM, height=HEIGHT,
                                     vp=true_vp(self.pose))
        self.a_px = ground_to_pixel(self.pose, 5.0, 0.9)
        self.b_px = ground_to_pixel(self.pose, 5.0, -0.7)

    def test_recovers_fx(self):
        bad = self.model.replace(cam=CAM.replace(fx=CAM.fx * 1.04))
        _, fitted = fc.ground_homography(bad, self.a_px, self.b_px, 1.6)
        assert abs(fitted.cam.fx - CAM.fx) / CAM.fx < 0.01

    def test_mapping_agrees_with_truth(self):
        h, _ = fc.ground_homography(self.model, self.a_px, self.b_px, 1.6)
        for lon in (5.0, 10.0, 20.0):
            for lat in (-3.0, 0.0, 3.0):
                px = ground_to_pixel(self.pose, lon, lat)
                g = apply_homography(h, px)
                assert abs(g[0] - lon) / lon < 0.02

    def test_mapping_agrees_with_range_point(self):
        h, fitted = fc.ground_homography(self.model, self.a_px, self.b_px,
                                         1.6)
        for lon in (6.0, 12.0, 25.0):
            for lat in (-4.0, 1.0, 4.0):
                px = ground_to_pixel(self.pose, lon, lat)
                g = apply_homography(h, px)
                r = fc.range_point(fitted, px)
                assert np.linalg.norm(np.asarray(r) - g) \
                    / np.linalg.norm(r) < 0.01

    def test_coincident_points_degenerate(self):
        with pytest.raises(Degenerate):
            fc.ground_homography(self.model, self.a_px, self.a_px, 1.6)


class TestLidarToCar:
    TRUTH = Pose(Rotation.from_euler_zyx(0.2, -0.05, 0.1), [1.5, 0.1, -0.8])

    def pairs(self, n=3, seed=0):
        rng = np.random.default_rng(seed)
        p = rng.uniform(-3, 3, size=(n, 3))
        return p, self.TRUTH.transform(p)

    def test_exact_recovery(self):
        p, q = self.pairs()
        res = fc.lidar_to_car(p, q, fc.MountConstraint(
            a=self.TRUTH.translation, lam=0.05))
        assert np.linalg.norm(res.pose.translation
                              - self.TRUTH.translation) < 1e-9
        assert res.pose.rotation.angle_to(self.TRUTH.rotation) < 1e-9
        assert not res.extra["constraint_active"]

    def test_matches_kabsch_oracle_with_huge_lambda(self):
        rng = np.random.default_rng(3)
        p = rng.uniform(-3, 3, size=(8, 3))
        q = self.TRUTH.transform(p) + rng.normal(0, 0.01, (8, 3))
        res = fc.lidar_to_car(p, q, fc.MountConstraint(a=np.zeros(3),
                                                       lam=1e9))
        # independent Kabsch/Umeyama oracle
        pc = p - p.mean(axis=0)
        qc = q - q.mean(axis=0)
        h = pc.T @ qc
        u, _, vt = np.linalg.svd(h)
        d = np.sign(np.linalg.det(vt.T @ u.T))
        r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
        t = q.mean(axis=0) - r @ p.mean(axis=0)
        assert np.linalg.norm(res.pose.rotation.matrix - r) < 1e-9
        assert np.linalg.norm(res.pose.translation - t) < 1e-9

    def test_collinear(self):
        p = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2.0]])
        with pytest.raises(CollinearPoints):
            fc.lidar_to_car(p, self.TRUTH.transform(p),
                            fc.MountConstraint(a=np.zeros(3), lam=0.05))

    def test_offset_prior_clamps_to_box(self):
        p, q = self.pairs()
        a = self.TRUTH.translation + np.array([0.2, 0.0, 0.0])
        res = fc.lidar_to_car(p, q, fc.MountConstraint(a=a, lam=0.05))
        assert res.extra["constraint_active"]
        # projection-onto-box oracle for the clamped axis
        assert res.pose.translation[0] == pytest.approx(a[0] - 0.05)
        assert np.all(res.pose.translation >= a - 0.05 - 1e-12)
        assert np.all(res.pose.translation <= a + 0.05 + 1e-12)

    def test_infeasible(self):
        p, q = self.pairs(n=6, seed=1)
        a = self.TRUTH.translation + np.array([5.0, 5.0, 5.0])
        with pytest.raises(InfeasibleConstraint):
            fc.lidar_to_car(p, q, fc.MountConstraint(a=a, lam=0.01))


class TestAfterSale:
    @staticmethod
    def picked(pose):
        return [ground_to_pixel(pose, 8.0, 1.75),
                ground_to_pixel(pose, 25.0, 1.75),
                ground_to_pixel(pose, 8.0, -1.75),
                ground_to_pixel(pose, 25.0, -1.75)]

    def test_zero_roll_matches_factory_path(self):
        pose = cam_rig(0.0)
        model = fc.RangingModel(cam=CAM, height=HEIGHT, vp=true_vp(pose))
        hg, _ = fc.ground_homography(model, ground_to_pixel(pose, 5.0, 0.9),
                                     ground_to_pixel(pose, 5.0, -0.7), 1.6)
        has, roll = fc.after_sale_homography(self.picked(pose), CAM, HEIGHT)
        assert abs(roll) < 1e-9
        for lon in (8.0, 15.0, 25.0):
            for lat in (-2.0, 0.0, 2.0):
                px = ground_to_pixel(pose, lon, lat)
                a = apply_homography(hg, px)
                b = apply_homography(has, px)
                assert np.linalg.norm(a - b) / np.linalg.norm(a) < 0.01

    def test_roll_correction_improves_lateral(self):
        pose = cam_rig(2.0)
        picked = self.picked(pose)
        roll_line = (ground_to_pixel(pose, 12.0, 2.0),
                     ground_to_pixel(pose, 12.0, -2.0))
        h_corr, roll = fc.after_sale_homography(picked, CAM, HEIGHT,
                                                roll_line=roll_line)
        h_unc, _ = fc.after_sale_homography(picked, CAM, HEIGHT)
        assert abs(abs(math.degrees(roll)) - 2.0) < 0.05
        px = ground_to_pixel(pose, 10.0, 2.5)
        err_corr = abs(apply_homography(h_corr, px)[1] - 2.5)
        err_unc = abs(apply_homography(h_unc, px)[1] - 2.5)
        assert err_unc >= 5 * err_corr

    def test_parallel_lines(self):
        picked = [(100, 500), (100, 300), (900, 500), (900, 300)]
        with pytest.raises(ParallelLinesDoNotIntersect):
            fc.after_sale_homography(picked, CAM, HEIGHT)
