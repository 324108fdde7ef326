import math

import numpy as np
import pytest

from autocal import cloud as pc
from autocal.errors import EmptyCloud, NoPlane, ParseError, TooFewPoints
from autocal.geom import Pose, Rotation

RNG = np.random.default_rng(777)


def make_cloud(n=100, rng=RNG, scale=10.0):
    return pc.PointCloud(rng.uniform(-scale, scale, size=(n, 3)),
                         rng.uniform(0, 255, size=n))


class TestPointCloud:
    def test_invariants(self):
        with pytest.raises(ValueError):
            pc.PointCloud([[np.nan, 0, 0]])
        with pytest.raises(ValueError):
            pc.PointCloud([[0, 0, 0]], [300.0])

    def test_immutable(self):
        c = make_cloud(10)
        with pytest.raises(ValueError):
            c.xyz[0, 0] = 1.0


class TestPcdIO:
    def test_round_trip_bitwise(self, tmp_path):
        c = make_cloud(1000)
        path = tmp_path / "cloud.pcd"
        pc.save_cloud(c, path)
        c2 = pc.load_cloud(path)
        assert np.array_equal(c.xyz, c2.xyz)
        assert np.array_equal(c.intensity, c2.intensity)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "bad.pcd"
        path.write_text("VERSION 0.7\nFIELDS x y z\nPOINTS 0\nDATA ascii\n")
        with pytest.raises(ParseError):
            pc.load_cloud(path)

    def test_empty_data_section(self, tmp_path):
        path = tmp_path / "empty.pcd"
        pc.save_cloud(pc.PointCloud(np.zeros((0, 3))), path)
        c = pc.load_cloud(path)
        assert len(c) == 0

    def test_bad_row(self, tmp_path):
        path = tmp_path / "bad2.pcd"
        path.write_text("FIELDS x y z intensity\nPOINTS 1\nDATA ascii\n1 2 3\n")
        with pytest.raises(ParseError):
            pc.load_cloud(path)


class TestRansacPlane:
    def test_exact_plane(self):
        rng = np.random.default_rng(1)
        xy = rng.uniform(-5, 5, size=(200, 2))
        c = pc.PointCloud(np.column_stack([xy, np.zeros(200)]))
        gp = pc.ransac_plane(c, eps=0.01, seed=3)
        assert abs(abs(gp.c) - 1.0) < 1e-9
        assert abs(gp.d) < 1e-9
        assert abs(gp.a) < 1e-9 and abs(gp.b) < 1e-9

    def test_noisy_plane_with_outliers(self):
        # oracle: least squares on the true inliers
        rng = np.random.default_rng(2)
        n_in, n_out = 700, 300
        xy = rng.uniform(-10, 10, size=(n_in, 2))
        inliers = np.column_stack([xy, rng.normal(0, 0.01, n_in)])
        outliers = rng.uniform(-10, 10, size=(n_out, 3))
        pts = np.vstack([inliers, outliers])
        c = pc.PointCloud(pts)
        gp = pc.ransac_plane(c, eps=0.03, max_iters=300,
                             constraint=pc.GROUND_CONSTRAINT, seed=5)
        n_oracle, _ = pc._lsq_plane(inliers)
        if n_oracle[2] < 0:
            n_oracle = -n_oracle
        angle = math.degrees(math.acos(np.clip(gp.normal @ n_oracle, -1, 1)))
        assert angle < 0.5
        ang_z = math.degrees(math.acos(abs(gp.c)))
        assert ang_z < 0.5

    def test_too_few_points(self):
        with pytest.raises(TooFewPoints):
            pc.ransac_plane(pc.PointCloud([[0, 0, 0], [1, 1, 1.0]]), eps=0.1)

    def test_no_plane(self):
        rng = np.random.default_rng(4)
        c = pc.PointCloud(rng.uniform(-10, 10, size=(400, 3)))
        with pytest.raises(NoPlane):
            pc.ransac_plane(c, eps=0.0005, max_iters=30, seed=6)

    def test_inliers_satisfy_bound(self):
        rng = np.random.default_rng(7)
        for seed in range(5):
            xy = rng.uniform(-5, 5, size=(300, 2))
            z = 0.3 * xy[:, 0] - 0.1 * xy[:, 1] + rng.normal(0, 0.02, 300) + 1.0
            c = pc.PointCloud(np.column_stack([xy, z]))
            gp = pc.ransac_plane(c, eps=0.05, seed=seed)
            d = np.abs(gp.distances(c.xyz[gp.inlier_indices]))
            assert np.all(d <= 0.05 + 1e-12)
            assert abs(np.linalg.norm(gp.normal) - 1.0) < 1e-9


class TestNearest:
    def test_exact_hit(self):
        c = make_cloud(50)
        i, d = pc.nearest(c, c.xyz[17])
        assert i == 17 and d == 0.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        c = pc.PointCloud(rng.uniform(-10, 10, size=(1000, 3)))
        for _ in range(100):
            q = rng.uniform(-12, 12, size=3)
            i, d = pc.nearest(c, q)
            # O(N) brute-force oracle
            dists = np.linalg.norm(c.xyz - q, axis=1)
            j = int(np.argmin(dists))
            assert i == j
            assert abs(d - dists[j]) < 1e-12

    def test_empty(self):
        with pytest.raises(EmptyCloud):
            pc.nearest(pc.PointCloud(np.zeros((0, 3))), [0, 0, 0])


class TestOctree:
    def test_single_point_hand_count(self):
        # root side 1 m, min_side 0.25 -> cut depth 2, one leaf of 0.25^3
        c = pc.PointCloud([[0.31, 0.12, -0.07]])
        v = pc.octree_volume(c, min_side=0.25, root=([0, 0, 0], 1.0))
        assert v == pytest.approx(0.015625, abs=1e-15)

    def test_duplicates_do_not_change_volume(self):
        c = make_cloud(500)
        doubled = pc.PointCloud(np.vstack([c.xyz, c.xyz]))
        assert pc.octree_volume(c, 0.5) == pc.octree_volume(doubled, 0.5)

    def test_alignment_shrinks_volume(self):
        # aligned merge vs 2 deg yaw-misaligned merge, direct evaluation
        rng = np.random.default_rng(9)
        scene = np.vstack([
            np.column_stack([rng.uniform(-10, 10, 3000),
                             rng.uniform(-10, 10, 3000),
                             np.zeros(3000)]),
            np.column_stack([rng.uniform(-10, 10, 500),
                             np.full(500, 5.0),
                             rng.uniform(0, 3, 500)]),
        ])
        yaw = Pose(Rotation.from_euler_zyx(math.radians(2), 0, 0), np.zeros(3))
        aligned = pc.PointCloud(np.vstack([scene, scene]))
        misaligned = pc.PointCloud(np.vstack([scene, yaw.transform(scene)]))
        root = ([0, 0, 5.0], 40.0)
        v_a = pc.octree_volume(aligned, 0.4, root=root)
        v_m = pc.octree_volume(misaligned, 0.4, root=root)
        assert v_a < v_m

    def test_refinement_monotonicity(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            c = pc.PointCloud(rng.uniform(-5, 5, size=(400, 3)))
            sides = [4.0, 2.0, 1.0, 0.5, 0.25]
            root = (c.xyz.mean(axis=0), 12.0)
            vols = [pc.octree_volume(c, s, root=root) for s in sides]
            assert all(a >= b - 1e-12 for a, b in zip(vols, vols[1:]))

    def test_empty(self):
        with pytest.raises(EmptyCloud):
            pc.octree_volume(pc.PointCloud(np.zeros((0, 3))), 0.1)
