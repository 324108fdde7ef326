"""Acceptance suite: one test per primary criterion, each at its stated
tolerance, printing one PASS line on success (run with -s to see them
inline; pytest records them in the captured output otherwise)."""

import math
import time

import numpy as np
import pytest

from autocal import (board_detect as bd, cloud as pc, distortion_eval as de,
                     factory_camera as fc, imaging as im, lidar_imu,
                     multi_lidar as ml, online, synth,
                     target_lidar_camera as tlc, targetless_road as road)
from autocal.geom import (CameraModel, Pose, Rotation, project,
                          project_valid, rodrigues, unproject)
from autocal.lidar_imu import StampedPose


def ok(name):
    print(f"\nACCEPTANCE PASS: {name}")


class TestAcceptance:

    def test_01_joint_target_calibration(self):
        """alpha=1/beta=60 defaults; 2 deg / 5 cm perturbation recovered
        within 0.2 deg / 1 cm; runtime < 30 s."""
        cam_true = CameraModel(fx=1200, fy=1200, cx=640, cy=360,
                               width=1280, height=720)
        spec = bd.BoardSpec(kind="checkerboard", rows=7, cols=5, pitch=0.12)
        board3 = spec.grid_points_3d()
        holes_b = np.array([[-0.18, -0.30, 0], [0.18, -0.30, 0],
                            [-0.18, 0.30, 0], [0.18, 0.30, 0]])
        x_true = Pose(Rotation.from_euler_zyx(math.radians(2),
                                              math.radians(-1),
                                              math.radians(1.5)),
                      [0.1, -0.3, -0.15])
        rng = np.random.default_rng(5)
        views = []
        while len(views) < 6:
            rot = Rotation.from_euler_zyx(rng.uniform(-0.25, 0.25),
                                          rng.uniform(-0.55, 0.55),
                                          rng.uniform(-0.55, 0.55))
            pose = Pose(rot, [rng.uniform(-0.25, 0.25),
                              rng.uniform(-0.15, 0.15),
                              rng.uniform(1.8, 3.0)])
            uv = project(cam_true, pose.transform(board3))
            if uv.min() < 5 or uv[:, 0].max() > 1274 or uv[:, 1].max() > 714:
                continue
            holes_lidar = x_true.inverse().transform(pose.transform(holes_b))
            views.append(tlc.ViewObservation(
                corners_px=uv, board_corners=board3,
                circle_centers_lidar=holes_lidar,
                circle_centers_board=holes_b))
        obs = tlc.JointObservation(views=views)
        weights = tlc.JointWeights()
        assert weights.alpha == 1.0 and weights.beta == 60.0
        axis = np.array([0.6, 0.55, 0.58])
        axis /= np.linalg.norm(axis)
        init_ext = Pose(x_true.rotation
                        @ Rotation.from_rotvec(axis * math.radians(2.0)),
                        x_true.translation + [0.03, -0.028, 0.028])
        init_cam = CameraModel(fx=1180, fy=1215, cx=630, cy=368,
                               width=1280, height=720)
        t0 = time.monotonic()
        res = tlc.calibrate_joint(obs, weights, init_cam, init_ext)
        elapsed = time.monotonic() - t0
        rot_err = math.degrees(res.pose.rotation.angle_to(x_true.rotation))
        trans_err = np.linalg.norm(res.pose.translation - x_true.translation)
        assert rot_err < 0.2
        assert trans_err < 0.01
        assert elapsed < 30.0
        ok(f"joint target calibration ({rot_err:.2e} deg, "
           f"{trans_err * 100:.2e} cm, {elapsed:.1f} s)")

    def test_02_multi_lidar_pipeline(self):
        """true yaw 10 deg, t=(1.2, 0.3, 0.2) recovered within
        0.3 deg / 0.05 m; stage metrics non-increasing; runtime < 60 s."""
        scene = synth.urban_scene(seed=3)
        beam = synth.LidarBeamModel(rings=28, azimuth_steps=720,
                                    fov_up_deg=10, fov_down_deg=-24)
        master_pose = Pose(Rotation.identity(), [0, 0, 1.8])
        x_true = Pose(Rotation.from_euler_zyx(math.radians(10), 0, 0),
                      [1.2, 0.3, 0.2])
        master = synth.sample_lidar(scene, master_pose, beam, seed=1)
        slave = synth.sample_lidar(scene, master_pose @ x_true, beam, seed=2)
        t0 = time.monotonic()
        res = ml.calibrate_pair(master, slave, eps=0.05)
        elapsed = time.monotonic() - t0
        rot_err = math.degrees(res.pose.rotation.angle_to(x_true.rotation))
        trans_err = np.linalg.norm(res.pose.translation - x_true.translation)
        assert rot_err < 0.3
        assert trans_err < 0.05
        assert res.residuals["icp_rms_after"] \
            <= res.residuals["icp_rms_before"]
        assert res.residuals["octree_volume_after"] \
            <= res.residuals["octree_volume_before"]
        assert elapsed < 60.0
        ok(f"multi-LiDAR pipeline ({rot_err:.3f} deg, {trans_err:.3f} m, "
           f"{elapsed:.1f} s)")

    def test_03_lidar_imu(self):
        """hand-eye exact on the noiseless figure-eight; windowed
        refinement within 0.5 deg / 0.05 m under 1 cm odometry noise;
        plane-cost minimum equals the smallest covariance eigenvalue."""
        x_true = Pose(Rotation.from_euler_zyx(math.radians(5),
                                              math.radians(-2),
                                              math.radians(3)),
                      [0.9, -0.2, 0.4])
        tr = synth.gen_trajectory("figure_eight", duration=30.0, scale=10.0,
                                  bank_gain=0.7)
        x0 = lidar_imu.handeye_init(tr.poses, tr.sensor_track(x_true))
        assert x0.rotation.angle_to(x_true.rotation) < 1e-6
        assert np.linalg.norm(x0.translation - x_true.translation) < 1e-6

        scene = synth.room_scene()
        beam = synth.LidarBeamModel(rings=14, azimuth_steps=110,
                                    fov_up_deg=8, fov_down_deg=-20)
        rng = np.random.default_rng(0)
        frames = []
        for k in range(0, len(tr.poses), 10):
            sp = tr.poses[k]
            cloud = synth.sample_lidar(scene, sp.pose @ x_true, beam, seed=k)
            if len(cloud) > 400:
                cloud = cloud.select(rng.choice(len(cloud), 400,
                                                replace=False))
            frames.append((sp.stamp, cloud))
        noise = np.random.default_rng(7)
        noisy = [StampedPose(s.stamp,
                             Pose(s.pose.rotation, s.pose.translation
                                  + noise.normal(0, 0.01, 3)))
                 for s in tr.poses]
        init = Pose(x_true.rotation
                    @ Rotation.from_rotvec([0.02, -0.02, 0.015]),
                    x_true.translation + [0.05, -0.06, 0.05])
        res = lidar_imu.calibrate(noisy, frames, init)
        rot_err = math.degrees(res.pose.rotation.angle_to(x_true.rotation))
        trans_err = np.linalg.norm(res.pose.translation - x_true.translation)
        assert rot_err < 0.5
        assert trans_err < 0.05

        rng2 = np.random.default_rng(1)
        for _ in range(50):
            pts = rng2.normal(size=(rng2.integers(10, 40), 3)) * [2, 1, 0.1]
            c = pts.mean(axis=0)
            q = pts - c
            w, v = np.linalg.eigh(q.T @ q / len(pts))
            assert abs(lidar_imu.plane_cost(pts, v[:, 0], c) - w[0]) <= 1e-9
        ok(f"LiDAR-IMU (init exact; refined {rot_err:.3f} deg / "
           f"{trans_err:.3f} m under noise; eigen oracle 50/50)")

    def test_04_targetless_road(self):
        """J_proj at truth beats every perturbation-grid node; refinement
        from 2 deg / 0.2 m converges within 0.5 deg / 0.05 m."""
        cam = CameraModel(fx=1000, fy=1000, cx=480, cy=270,
                          width=960, height=540)
        cam_mount = synth.camera_mount(t=(1.2, 0.0, 1.5))
        lidar_mount = Pose(Rotation.identity(), [0.8, 0.0, 1.9])
        x_true = cam_mount.inverse() @ lidar_mount
        scene = synth.road_scene()
        masks = synth.render_scene_masks(scene, cam, cam_mount)
        beam = synth.LidarBeamModel(rings=96, azimuth_steps=1000,
                                    fov_up_deg=5, fov_down_deg=-24)
        cloud, cls = synth.sample_lidar(scene, lidar_mount, beam,
                                        return_classes=True)
        maps = {c: road.build_height_map(m, 0.98, cls=c)
                for c, m in masks.items()}

        def curate(pts, name):
            uv, keep = project_valid(cam, x_true.transform(pts))
            keep &= (uv[:, 0] > 40) & (uv[:, 0] < cam.width - 40) \
                & (uv[:, 1] > 40) & (uv[:, 1] < cam.height - 8)
            keep &= np.linalg.norm(pts, axis=1) < 35.0
            ui = np.clip(np.round(uv[:, 0]).astype(int), 0, cam.width - 1)
            vi = np.clip(np.round(uv[:, 1]).astype(int), 0, cam.height - 1)
            return pts[keep & (maps[name].heights[vi, ui] >= 1.0)]

        clouds = {"lane": curate(cloud.xyz[cls == synth.CLASS_LANE], "lane"),
                  "pole": curate(cloud.xyz[cls == synth.CLASS_POLE], "pole")}
        j_true = road.j_proj(clouds, maps, x_true, cam, 1.0)
        # per-axis nodes of the +-2 deg / +-0.2 m grid at 0.5 deg / 0.05 m
        for axis in range(3):
            for d in np.arange(-2, 2.01, 0.5):
                if abs(d) < 1e-9:
                    continue
                rv = np.zeros(3)
                rv[axis] = math.radians(d)
                p = Pose(x_true.rotation @ Rotation.from_rotvec(rv),
                         x_true.translation)
                assert road.j_proj(clouds, maps, p, cam, 1.0) < j_true
            for d in np.arange(-0.2, 0.201, 0.05):
                if abs(d) < 1e-9:
                    continue
                t = x_true.translation.copy()
                t[axis] += d
                p = Pose(x_true.rotation, t)
                assert road.j_proj(clouds, maps, p, cam, 1.0) < j_true
        # seeded sample of the full product grid
        rng = np.random.default_rng(0)
        steps_r = np.array([-2, -1.5, -1, -0.5, 0.5, 1, 1.5, 2])
        steps_t = np.array([-0.2, -0.15, -0.1, -0.05, 0.05, 0.1, 0.15, 0.2])
        for _ in range(300):
            rv = rng.choice(steps_r, 3) * math.pi / 180
            dt = rng.choice(steps_t, 3)
            p = Pose(x_true.rotation @ Rotation.from_rotvec(rv),
                     x_true.translation + dt)
            assert road.j_proj(clouds, maps, p, cam, 1.0) < j_true

        rng = np.random.default_rng(1)
        ax = rng.normal(size=3)
        ax /= np.linalg.norm(ax)
        init = Pose(x_true.rotation
                    @ Rotation.from_rotvec(ax * math.radians(2.0)),
                    x_true.translation + rng.choice([-1, 1], 3) * 0.115)
        res = road.calibrate_road(clouds, masks, init, cam)
        rot_err = math.degrees(res.pose.rotation.angle_to(x_true.rotation))
        trans_err = np.linalg.norm(res.pose.translation - x_true.translation)
        assert rot_err < 0.5
        assert trans_err < 0.05
        ok(f"targetless road (grid dominated; refined {rot_err:.3f} deg / "
           f"{trans_err:.3f} m)")

    def test_05_temporal_offset(self):
        """injected 40 ms offset recovered within 10 ms at 100 Hz IMU /
        10 Hz camera."""
        tr = synth.gen_trajectory("figure_eight", duration=25.0)
        imu = tr.rates
        cam_idx = np.arange(0, len(tr.poses), 10)
        true_td = 0.040
        cam = online.rates_from_poses(
            tr.stamps[cam_idx] - true_td,
            [tr.poses[i].pose.rotation for i in cam_idx])
        td = online.temporal_offset(imu, cam, np.arange(-0.1, 0.1001, 0.01))
        assert abs(td - true_td) < 0.010
        ok(f"temporal offset (err {abs(td - true_td) * 1000:.2f} ms)")

    def test_06_radar_yaw(self):
        """yaw=2 deg recovered within 0.1 deg; estimate invariant under
        uniform velocity scaling."""
        rng = np.random.default_rng(0)
        statics = np.column_stack([rng.uniform(20, 90, 25),
                                   rng.uniform(-30, 30, 25)])
        tr = synth.gen_trajectory("straight", duration=8.0, speed=6.0)
        dets, (ts, vs) = synth.simulate_radar(statics, tr, math.radians(2.0))
        yaw = online.radar_yaw(dets, (ts, vs))
        assert abs(math.degrees(yaw) - 2.0) < 0.1
        scaled = [online.RadarDetection(v=3 * d.v, angle=d.angle,
                                        distance=d.distance, stamp=d.stamp)
                  for d in dets]
        yaw_scaled = online.radar_yaw(scaled, (ts, 3 * vs))
        assert abs(yaw - yaw_scaled) < 1e-12
        ok(f"radar yaw (err {abs(math.degrees(yaw) - 2.0):.4f} deg, "
           "scale-invariant)")

    def test_07_distortion_eval(self):
        """ideal render RMS < 0.1 px; RMS strictly increasing over
        k1 in {-0.05, -0.1, -0.2}; exact collinear gives S = d_max = 0."""
        cam0 = CameraModel(fx=900, fy=900, cx=400, cy=250,
                           width=800, height=500)
        rep0 = de.evaluate(de.render_line_target(cam0), cam0)
        assert rep0.rms < 0.1
        prev = rep0.rms
        for k1 in (-0.05, -0.1, -0.2):
            camk = CameraModel(fx=900, fy=900, cx=400, cy=250, k1=k1,
                               width=800, height=500)
            rep = de.evaluate(de.render_line_target(camk), cam0)
            assert rep.rms > prev
            prev = rep.rms
        pts = np.column_stack([np.linspace(0, 100, 60),
                               np.linspace(5, 45, 60)])
        repc = de.report_from_samples([pts, pts + [2.0, 1.0]])
        assert repc.s_total == pytest.approx(0.0, abs=1e-18)
        assert repc.d_max == pytest.approx(0.0, abs=1e-12)
        ok(f"distortion evaluation (ideal rms {rep0.rms:.3f} px, "
           "monotone in |k1|, collinear exact)")

    def test_08_board_detection(self):
        """checkerboard and circle-board corners within 0.5 px of the
        render truth for all corners over 20 seeds; round-hole centers
        within 1 cm under 3 mm noise."""
        cam = CameraModel(fx=1200, fy=1200, cx=480, cy=300,
                          width=960, height=600)
        checker = bd.BoardSpec(kind="checkerboard", rows=5, cols=7,
                               pitch=0.08)
        circle = bd.BoardSpec(kind="circle", rows=5, cols=7, pitch=0.09,
                              black_radius=0.030, white_radius=0.024,
                              black_cols=(2, 4))
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            rot = Rotation.from_euler_zyx(
                rng.uniform(-math.radians(15), math.radians(15)),
                rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05))
            pose = Pose(rot, [rng.uniform(-0.05, 0.05),
                              rng.uniform(-0.04, 0.04),
                              rng.uniform(1.45, 1.7)])
            img, truth = synth.render_board_image(checker, cam, pose)
            det = bd.detect_checkerboard(img, checker)
            err = np.linalg.norm(det.points - truth.points, axis=1)
            assert err.max() < 0.5, f"checker seed {seed}: {err.max():.3f}"
            worst = max(worst, err.max())
            img, truth = synth.render_board_image(circle, cam, pose)
            det = bd.detect_circle_board(img, circle)
            err = np.linalg.norm(det.points - truth.points, axis=1)
            assert err.max() < 0.5, f"circle seed {seed}: {err.max():.3f}"
            worst = max(worst, err.max())

        holes = ((-0.35, -0.2), (0.35, -0.2), (-0.35, 0.2), (0.35, 0.2))
        spec = bd.BoardSpec(kind="round_hole", hole_radius=0.10,
                            hole_centers=holes, width=1.2, height=0.9)
        board_rot = Rotation(np.array([[0.0, 0, -1], [1, 0, 0],
                                       [0, -1, 0]]))
        board_pose = Pose(board_rot, [4.0, 0.0, 1.2])
        scene = synth.board_rig_scene(spec, board_pose)
        sensor = Pose(Rotation.identity(), [0, 0, 1.0])
        beam = synth.LidarBeamModel(rings=160, azimuth_steps=3600,
                                    fov_up_deg=12, fov_down_deg=-12)
        cloud = synth.sample_lidar(scene, sensor, beam, noise_sigma=0.003,
                                   seed=1)
        prior = sensor.inverse() @ board_pose
        det = bd.detect_round_hole_board(
            cloud, spec, ([3.0, -1.5, -0.5], [5.0, 1.5, 2.5]), prior)
        truth3 = prior.transform(spec.hole_centers_3d())
        hole_err = max(np.linalg.norm(det.points - t, axis=1).min()
                       for t in truth3)
        assert hole_err < 0.01
        ok(f"board detection (20 seeds, worst {worst:.3f} px; "
           f"hole centers {hole_err * 1000:.2f} mm)")

    def test_09_factory_camera(self):
        """ranging error < 2% at 20 m on flat ground; lidar_to_car exact on
        noiseless triples and equal to the closed-form solution as the
        box constraint is released."""
        cam = CameraModel(fx=1100, fy=1100, cx=640, cy=360,
                          width=1280, height=720)
        pose = synth.camera_mount(pitch=math.radians(5.0), t=(0, 0, 1.5))
        vp = project(cam, pose.rotation.inverse().apply([1.0, 0, 0]))
        model = fc.RangingModel(cam=cam, height=1.5, vp=vp)
        for lat in (-4.0, 0.0, 4.0):
            px = project(cam, pose.inverse().transform([20.0, lat, 0.0]))
            d_lon, d_lat = fc.range_point(model, px)
            assert abs(d_lon - 20.0) / 20.0 < 0.02
            assert abs(d_lat - lat) < 0.02 * 20.0

        truth = Pose(Rotation.from_euler_zyx(0.2, -0.05, 0.1),
                     [1.5, 0.1, -0.8])
        rng = np.random.default_rng(0)
        p = rng.uniform(-3, 3, size=(3, 3))
        q = truth.transform(p)
        res = fc.lidar_to_car(p, q, fc.MountConstraint(
            a=truth.translation, lam=0.05))
        assert np.linalg.norm(res.pose.translation
                              - truth.translation) < 1e-9
        assert res.pose.rotation.angle_to(truth.rotation) < 1e-9
        # lambda -> infinity equals the Kabsch/Umeyama closed form
        p8 = rng.uniform(-3, 3, size=(8, 3))
        q8 = truth.transform(p8) + rng.normal(0, 0.01, (8, 3))
        res_inf = fc.lidar_to_car(p8, q8, fc.MountConstraint(
            a=np.zeros(3), lam=1e9))
        pc_ = p8 - p8.mean(axis=0)
        qc = q8 - q8.mean(axis=0)
        u, _, vt = np.linalg.svd(pc_.T @ qc)
        d = np.sign(np.linalg.det(vt.T @ u.T))
        r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
        t = q8.mean(axis=0) - r @ p8.mean(axis=0)
        assert np.linalg.norm(res_inf.pose.rotation.matrix - r) < 1e-9
        assert np.linalg.norm(res_inf.pose.translation - t) < 1e-9
        ok("factory camera (ranging < 2% at 20 m; lidar2car exact and "
           "matches closed form)")

    def test_10_geometry_cloud_invariants(self):
        """orthonormality, conversion round-trips, project/unproject,
        octree refinement monotonicity, brute-force NN equivalence."""
        rng = np.random.default_rng(42)
        for _ in range(100):
            q = rng.normal(size=4)
            r = Rotation.from_quat(q / np.linalg.norm(q))
            assert np.linalg.norm(r.matrix.T @ r.matrix - np.eye(3)) < 1e-9
            r2 = Rotation.from_quat(r.as_quat())
            assert np.linalg.norm(r.matrix - r2.matrix) < 1e-9
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            ang = rng.uniform(0.01, math.pi - 0.01)
            rr = rodrigues(axis, ang)
            a2, g2 = rr.as_axis_angle()
            assert np.linalg.norm(rodrigues(a2, g2).matrix - rr.matrix) \
                < 1e-9
        cam = CameraModel(fx=1000, fy=1000, cx=960, cy=540,
                          width=1920, height=1080)
        for _ in range(100):
            uv = rng.uniform([0, 0], [1920, 1080])
            z = rng.uniform(0.5, 50)
            assert np.linalg.norm(project(cam, unproject(cam, uv, z)) - uv) \
                < 1e-6
        cloud = pc.PointCloud(rng.uniform(-5, 5, size=(400, 3)))
        root = (cloud.xyz.mean(axis=0), 12.0)
        vols = [pc.octree_volume(cloud, s, root=root)
                for s in (4.0, 2.0, 1.0, 0.5, 0.25)]
        assert all(a >= b - 1e-12 for a, b in zip(vols, vols[1:]))
        big = pc.PointCloud(rng.uniform(-10, 10, size=(1000, 3)))
        for _ in range(100):
            qpt = rng.uniform(-12, 12, size=3)
            i, d = pc.nearest(big, qpt)
            dists = np.linalg.norm(big.xyz - qpt, axis=1)
            assert i == int(np.argmin(dists))
            assert abs(d - dists.min()) < 1e-12
        ok("geometry/cloud invariant suites")
