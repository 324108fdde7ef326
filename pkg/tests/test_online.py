import math

import numpy as np
import pytest

from autocal import online, synth
from autocal.errors import (DegenerateMotion, IllConditioned, LowExcitation,
                            NoStaticObjects, VehicleStationary)
from autocal.geom import Pose, Rotation

RNG = np.random.default_rng(2024)


def random_rotation(rng, scale=1.0):
    v = rng.normal(size=3) * scale
    return Rotation.from_rotvec(v)


def sinusoid_track(duration=12.0, rate=100.0, amp=(0.4, 0.25, 0.3),
                   freq=(0.7, 1.1, 0.5), t0=0.0):
    t = np.arange(int(duration * rate)) / rate + t0
    w = np.stack([amp[i] * np.sin(2 * math.pi * freq[i] * t + i)
                  for i in range(3)], axis=1)
    return online.AngularRateTrack(t, w)


def integrate_rates(track):
    """Pose rotations from body rates (for camera-frame downsampling)."""
    rots = [Rotation.identity()]
    for k in range(len(track.stamps) - 1):
        dt = track.stamps[k + 1] - track.stamps[k]
        rots.append(rots[-1] @ Rotation.from_rotvec(track.rates[k] * dt))
    return rots


class TestTemporalOffset:
    SEARCH = np.arange(-0.1, 0.1001, 0.01)

    def test_zero_offset(self):
        imu = sinusoid_track()
        rots = integrate_rates(imu)
        cam_idx = np.arange(0, len(imu.stamps), 10)
        cam = online.rates_from_poses(imu.stamps[cam_idx],
                                      [rots[i] for i in cam_idx])
        td = online.temporal_offset(imu, cam, self.SEARCH)
        assert abs(td) < 0.005

    def test_injected_offset_recovered(self):
        # camera clock lags by 40 ms: stamps are 40 ms smaller
        imu = sinusoid_track(duration=20.0)
        rots = integrate_rates(imu)
        cam_idx = np.arange(0, len(imu.stamps), 10)
        true_td = 0.040
        cam = online.rates_from_poses(imu.stamps[cam_idx] - true_td,
                                      [rots[i] for i in cam_idx])
        td = online.temporal_offset(imu, cam, self.SEARCH)
        assert abs(td - true_td) < 0.010

    def test_constant_rate_low_excitation(self):
        t = np.arange(0, 10, 0.01)
        w = np.tile([0.1, 0.0, 0.2], (len(t), 1))
        imu = online.AngularRateTrack(t, w)
        cam = online.AngularRateTrack(t[::10], w[::10])
        with pytest.raises(LowExcitation):
            online.temporal_offset(imu, cam, self.SEARCH)


class TestHandeyeRotation:
    def test_identity_when_motions_agree(self):
        motions = []
        rng = np.random.default_rng(1)
        for _ in range(10):
            r = random_rotation(rng, 0.5)
            motions.append((r, r))
        x = online.handeye_rotation(motions)
        assert np.linalg.norm(x.matrix - np.eye(3)) < 1e-9

    def test_recovers_ground_truth(self):
        # forward-generate R_b = X^-1 R_a X
        rng = np.random.default_rng(2)
        truth = random_rotation(rng)
        motions = []
        for _ in range(20):
            ra = random_rotation(rng, 0.6)
            rb = truth.inverse() @ ra @ truth
            motions.append((ra, rb))
        x = online.handeye_rotation(motions)
        assert x.angle_to(truth) < 1e-6

    def test_single_axis_degenerate(self):
        rng = np.random.default_rng(3)
        truth = random_rotation(rng)
        motions = []
        for _ in range(10):
            ra = Rotation.from_rotvec([0, 0, rng.uniform(0.2, 0.8)])
            rb = truth.inverse() @ ra @ truth
            motions.append((ra, rb))
        with pytest.raises(DegenerateMotion):
            online.handeye_rotation(motions)


class TestHandeyeTranslation:
    def test_recovers_ground_truth(self):
        # generate by the solved equation: (R_a - I) t = X t_b - t_a
        rng = np.random.default_rng(4)
        x = random_rotation(rng)
        t_x = rng.normal(size=3)
        motions = []
        for _ in range(12):
            ra = random_rotation(rng, 0.7)
            tb = rng.normal(size=3)
            ta = x.apply(tb) - (ra.matrix - np.eye(3)) @ t_x
            motions.append((ra, ta, tb))
        est = online.handeye_translation(motions, x)
        assert np.linalg.norm(est - t_x) < 1e-9

    def test_translation_only_ill_conditioned(self):
        rng = np.random.default_rng(5)
        x = random_rotation(rng)
        motions = [(Rotation.identity(), rng.normal(size=3),
                    rng.normal(size=3)) for _ in range(10)]
        with pytest.raises(IllConditioned):
            online.handeye_translation(motions, x)

    def test_zero_translation(self):
        rng = np.random.default_rng(6)
        x = random_rotation(rng)
        motions = []
        for _ in range(10):
            ra = random_rotation(rng, 0.5)
            tb = rng.normal(size=3)
            ta = x.apply(tb)
            motions.append((ra, ta, tb))
        est = online.handeye_translation(motions, x)
        assert np.linalg.norm(est) < 1e-9


class TestHandeyeEndToEnd:
    def test_camera_imu_from_trajectory(self):
        # noiseless rig: poses of both sensors from one trajectory
        truth = Pose(Rotation.from_euler_zyx(0.3, -0.1, 0.2),
                     [0.8, -0.3, 0.5])
        tr = synth.gen_trajectory("figure_eight", duration=25.0)
        imu_poses = [s.pose for s in tr.poses[::10]]
        cam_poses = [p @ truth for p in imu_poses]
        rots, trans = online.relative_motions(imu_poses, cam_poses)
        x = online.handeye_rotation(rots)
        assert x.angle_to(truth.rotation) < 1e-6
        t = online.handeye_translation(trans, x)
        assert np.linalg.norm(t - truth.translation) < 1e-6


class TestRadarYaw:
    @staticmethod
    def world(yaw_deg, speed=6.0, noise=0.0, movers=(), seed=0):
        rng = np.random.default_rng(seed)
        statics = np.column_stack([rng.uniform(20, 90, 25),
                                   rng.uniform(-30, 30, 25)])
        tr = synth.gen_trajectory("straight", duration=8.0, speed=speed)
        return synth.simulate_radar(statics, tr, math.radians(yaw_deg),
                                    noise_sigma=noise, seed=seed,
                                    movers=movers)

    def test_recovers_two_degrees(self):
        dets, speed = self.world(2.0)
        yaw = online.radar_yaw(dets, speed)
        assert abs(math.degrees(yaw) - 2.0) < 0.01

    def test_zero_yaw_dead_ahead_zero_residual(self):
        dets, speed = self.world(0.0)
        ahead = [d for d in dets if abs(d.angle) < 1e-9]
        ts, vs = speed
        for d in ahead:
            assert abs(d.v - np.interp(d.stamp, ts, vs)) < 1e-9

    def test_stationary_vehicle(self):
        dets, _ = self.world(1.0)
        ts = np.linspace(0, 8, 100)
        with pytest.raises(VehicleStationary):
            online.radar_yaw(dets, (ts, np.zeros(100)))

    def test_movers_only_rejected(self):
        tr = synth.gen_trajectory("straight", duration=8.0, speed=6.0)
        dets, speed = synth.simulate_radar(
            [], tr, math.radians(2.0),
            movers=(((60.0, 10.0), (-5.0, 0.0)), ((70.0, -8.0), (-6.0, 1.0))))
        with pytest.raises(NoStaticObjects):
            online.radar_yaw(dets, speed)

    def test_scale_invariance(self):
        dets, (ts, vs) = self.world(2.0)
        yaw1 = online.radar_yaw(dets, (ts, vs))
        scaled = [online.RadarDetection(v=3.0 * d.v, angle=d.angle,
                                        distance=d.distance, stamp=d.stamp)
                  for d in dets]
        yaw2 = online.radar_yaw(scaled, (ts, 3.0 * vs))
        assert abs(yaw1 - yaw2) < 1e-12
