import math

import numpy as np
import pytest

from autocal import distortion_eval as de, imaging as im
from autocal.errors import NoLines
from autocal.geom import CameraModel

CAM0 = CameraModel(fx=900, fy=900, cx=400, cy=250, width=800, height=500)


def cam_k1(k1):
    return CameraModel(fx=900, fy=900, cx=400, cy=250, k1=k1,
                       width=800, height=500)


class TestUndistort:
    def test_zero_distortion_identity(self):
        rng = np.random.default_rng(0)
        img = im.Image(rng.integers(0, 256, size=(60, 80), dtype=np.uint8))
        cam = CameraModel(fx=100, fy=100, cx=40, cy=30, width=80, height=60)
        out = de.undistort(img, cam)
        assert np.array_equal(out.data, img.data)

    def test_undistort_straightens_rendered_lines(self):
        cam = cam_k1(-0.1)
        img = de.render_line_target(cam, n_lines=4)
        rep = de.evaluate(img, cam)
        # max signed-residual spread per line stays within the sag budget
        assert rep.rms < 0.2
        assert float(rep.line_rms.max()) < 0.2

    def test_wrong_model_leaves_curvature(self):
        cam = cam_k1(-0.1)
        img = de.render_line_target(cam, n_lines=4)
        rep_identity = de.evaluate(img, CAM0)
        rep_true = de.evaluate(img, cam)
        assert rep_identity.rms > 3 * rep_true.rms


class TestExtractLineSamples:
    def test_single_vertical_edge_sample_count(self):
        a = np.full((200, 60), 40, dtype=np.uint8)
        a[:, 30:] = 220
        edges = im.canny_edges(im.Image(a), 20, 60)
        samples = de.extract_line_samples(edges)
        assert len(samples) == 1
        # ~200 px chain sampled at stride 2 -> about 100 samples
        assert 85 <= len(samples[0]) <= 110

    def test_blank_image(self):
        edges = im.Image(np.zeros((50, 50), dtype=np.uint8))
        with pytest.raises(NoLines):
            de.extract_line_samples(edges)

    def test_two_px_gap_merged(self):
        a = np.zeros((120, 40), dtype=np.uint8)
        a[10:60, 20] = 255
        a[62:110, 20] = 255   # 2-px gap at rows 60..61
        samples = de.extract_line_samples(im.Image(a))
        assert len(samples) == 1


class TestReport:
    def test_exact_collinear_gives_zero(self):
        pts = np.column_stack([np.linspace(0, 100, 60),
                               np.linspace(5, 45, 60)])
        rep = de.report_from_samples([pts, pts + [3.0, 1.0]])
        assert rep.s_total == pytest.approx(0.0, abs=1e-18)
        assert rep.d_max == pytest.approx(0.0, abs=1e-12)
        assert rep.rms == pytest.approx(0.0, abs=1e-12)

    def test_s_recomputable_from_samples(self):
        rng = np.random.default_rng(1)
        lists = []
        for _ in range(4):
            x = np.linspace(0, 200, 80)
            y = 0.3 * x + rng.normal(0, 0.3, 80)
            lists.append(np.column_stack([x, y]))
        rep = de.report_from_samples(lists)
        s = 0.0
        for pts in rep.samples:
            line = im.fit_line_tls(pts)
            s += float((line.signed_distance(pts) ** 2).sum())
        assert s == pytest.approx(rep.s_total, rel=1e-12)

    def test_d_max_formula(self):
        # d_max = sqrt(mean over lines of squared signed-residual spread)
        lists = []
        rng = np.random.default_rng(2)
        for _ in range(3):
            x = np.linspace(0, 100, 50)
            y = rng.normal(0, 0.5, 50)
            lists.append(np.column_stack([x, y]))
        rep = de.report_from_samples(lists)
        spreads = []
        for pts in lists:
            line = im.fit_line_tls(pts)
            r = line.signed_distance(pts)
            spreads.append(r.max() - r.min())
        oracle = math.sqrt(np.mean(np.square(spreads)))
        assert rep.d_max == pytest.approx(oracle, rel=1e-12)


class TestEvaluate:
    def test_ideal_render_rms(self):
        img = de.render_line_target(CAM0)
        rep = de.evaluate(img, CAM0)
        assert rep.line_count >= 6
        assert rep.rms < 0.1

    def test_rms_strictly_increasing_in_k1(self):
        prev = de.evaluate(de.render_line_target(CAM0), CAM0).rms
        for k1 in (-0.05, -0.1, -0.2):
            rep = de.evaluate(de.render_line_target(cam_k1(k1)), CAM0)
            assert rep.rms > prev
            prev = rep.rms

    def test_deterministic(self):
        img = de.render_line_target(cam_k1(-0.05))
        r1 = de.evaluate(img, CAM0)
        r2 = de.evaluate(img, CAM0)
        assert r1.rms == r2.rms
        assert r1.d_max == r2.d_max
        assert np.array_equal(r1.sample_counts, r2.sample_counts)
