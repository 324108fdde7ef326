"""Factory and after-sale camera calibration plus factory LiDAR-to-car
registration: vanishing point through the board homography, flat-ground
ranging, camera-to-ground homography, constrained rigid registration, and
the roll-corrected after-sale homography."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (AboveHorizon, AtInfinity, CollinearPoints, Degenerate,
                     InfeasibleConstraint, ParallelLinesDoNotIntersect)
from .geom import (CameraModel, Homography, Pose, Rotation,
                   apply_homography, fit_homography_dlt)
from .result import CalibResult


@dataclass(frozen=True)
class RangingModel:
    """Flat-ground ranging: camera height above ground plus the vanishing
    point of lines parallel to the vehicle's longitudinal axis."""

    cam: CameraModel
    height: float              # H^C, meters
    vp: np.ndarray             # (vp_x, vp_y) pixels

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError("camera height must be positive")
        vp = np.asarray(self.vp, dtype=float)
        diag = math.hypot(self.cam.width, self.cam.height)
        if np.linalg.norm(vp) > 4 * diag:
            raise ValueError("vanishing point implausibly far outside image")
        object.__setattr__(self, "vp", vp)

    def replace(self, **kw) -> "RangingModel":
        from dataclasses import replace as _replace
        return _replace(self, **kw)


@dataclass(frozen=True)
class MountConstraint:
    """Per-axis translation prior |t_i - a_i| <= lam from the mechanical
    mounting drawing."""

    a: np.ndarray
    lam: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("tolerance must be positive")
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))


def vanishing_point(board_h: Homography, offsets) -> np.ndarray:
    """Vanishing point of longitudinal lines: the board homography applied
    to the camera's lateral/vertical offsets from the board center (the ray
    through the camera parallel to the axis pierces the board there)."""
    return apply_homography(board_h, np.asarray(offsets, dtype=float))


def range_point(model: RangingModel, pixel) -> tuple[float, float]:
    """(D_lon, D_lat) of a ground pixel: D_lon = H f_y / (p_y - vp_y),
    D_lat = D_lon (vp_x - p_x) / f_x. Pixels at or above the horizon row
    raise AboveHorizon."""
    px, py = float(pixel[0]), float(pixel[1])
    dy = py - model.vp[1]
    if dy <= 1e-6:
        raise AboveHorizon(f"pixel row {py} not below the vanishing point")
    d_lon = model.height * model.cam.fy / dy
    d_lat = d_lon * (model.vp[0] - px) / model.cam.fx
    return d_lon, d_lat


def ground_homography(model: RangingModel, a_px, b_px,
                      true_gap: float) -> tuple[Homography, RangingModel]:
    """Image-to-ground homography calibrated on two ground points A, B with
    a known physical gap (e.g. the board's bottom corners dropped to the
    ground).

    The lateral focal length is corrected so the ranged |AB| matches the
    physical gap, C and D are constructed on the A-vp and B-vp rays, and a
    4-point DLT gives the homography mapping pixels to (D_lon, D_lat).
    Returns (homography, corrected ranging model)."""
    a_px = np.asarray(a_px, dtype=float)
    b_px = np.asarray(b_px, dtype=float)
    if np.linalg.norm(a_px - b_px) < 1e-9:
        raise Degenerate("A and B coincide")
    lon_a, lat_a = range_point(model, a_px)
    lon_b, lat_b = range_point(model, b_px)
    ranged_gap = abs(lat_a - lat_b)
    if ranged_gap < 1e-12:
        raise Degenerate("A and B have no lateral separation")
    # |lat| scales with 1/fx: solve fx from the gap constraint, keep fy
    fx_new = model.cam.fx * ranged_gap / true_gap
    model = model.replace(cam=model.cam.replace(fx=fx_new))

    def toward_vp(p, frac=0.25):
        return p + frac * (model.vp - p)

    pixels = [a_px, b_px, toward_vp(a_px), toward_vp(b_px)]
    ground = [range_point(model, p) for p in pixels]
    h = fit_homography_dlt(np.asarray(pixels), np.asarray(ground))
    return h, model


def lidar_to_car(p_lidar, p_car, constraint: MountConstraint,
                 rounds: int = 2) -> CalibResult:
    """Rigid transform T with T(p_lidar) ~ p_car from >= 3 non-collinear
    pairs, translation boxed per-axis around the mounting prior.

    Unconstrained Kabsch/Umeyama solve, then alternating projection of the
    translation onto the box with a rotation re-solve."""
    p = np.asarray(p_lidar, dtype=float).reshape(-1, 3)
    q = np.asarray(p_car, dtype=float).reshape(-1, 3)
    if len(p) < 3 or len(p) != len(q):
        raise ValueError("need >= 3 matched pairs")
    pc = p - p.mean(axis=0)
    s = np.linalg.svd(pc, compute_uv=False)
    if s[1] < 1e-9 * max(s[0], 1e-12):
        raise CollinearPoints("point set is collinear")

    def kabsch(src_c, dst_c):
        h = src_c.T @ dst_c
        u, _, vt = np.linalg.svd(h)
        d = np.sign(np.linalg.det(vt.T @ u.T))
        return Rotation(vt.T @ np.diag([1.0, 1.0, d]) @ u.T)

    rot = kabsch(pc, q - q.mean(axis=0))
    t = q.mean(axis=0) - rot.apply(p.mean(axis=0))
    lo = constraint.a - constraint.lam
    hi = constraint.a + constraint.lam
    active = bool(np.any(t < lo) or np.any(t > hi))
    t = np.clip(t, lo, hi)
    for _ in range(rounds - 1):
        # rotation re-solve with the translation pinned (no re-centering)
        h = p.T @ (q - t)
        u, _, vt = np.linalg.svd(h)
        d = np.sign(np.linalg.det(vt.T @ u.T))
        rot = Rotation(vt.T @ np.diag([1.0, 1.0, d]) @ u.T)
        t_free = (q - rot.apply(p)).mean(axis=0)
        active = active or bool(np.any(t_free < lo) or np.any(t_free > hi))
        t = np.clip(t_free, lo, hi)

    pose = Pose(rot, t)
    resid = np.linalg.norm(pose.transform(p) - q, axis=1)
    rms = float(np.sqrt((resid ** 2).mean()))
    if rms > 10 * constraint.lam:
        raise InfeasibleConstraint(
            f"residual RMS {rms:.3f} m exceeds 10*lambda "
            f"({10 * constraint.lam:.3f} m)")
    return CalibResult(tool="lidar2car", pose=pose,
                       residuals={"rms_m": rms,
                                  "max_m": float(resid.max())},
                       extra={"constraint_active": active},
                       converged=True)


def _intersect_lines(p1, p2, p3, p4):
    """Intersection of lines (p1, p2) and (p3, p4) in the plane."""
    d1 = p2 - p1
    d2 = p4 - p3
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-9 * (np.linalg.norm(d1) * np.linalg.norm(d2)):
        raise ParallelLinesDoNotIntersect("picked lines are parallel")
    t = ((p3[0] - p1[0]) * d2[1] - (p3[1] - p1[1]) * d2[0]) / denom
    return p1 + t * d1


def after_sale_homography(picked, cam: CameraModel, height: float,
                          roll_line=None) -> tuple[Homography, float]:
    """Ground homography from 4 picked lane pixels (2 left, 2 right) with
    optional roll correction.

    The two fitted lines intersect at the vanishing point. When `roll_line`
    (two pixels of a transversal ground segment with equal longitudinal
    distance) is given, the roll is its image slope; pixels and the
    vanishing point are de-rotated about the principal point before
    ranging. Returns (homography mapping raw pixels to ground, roll_rad)."""
    pts = np.asarray(picked, dtype=float).reshape(4, 2)
    vp = _intersect_lines(pts[0], pts[1], pts[2], pts[3])

    roll = 0.0
    if roll_line is not None:
        r1, r2 = (np.asarray(r, dtype=float) for r in roll_line)
        d = r2 - r1
        if abs(d[0]) < 1e-9:
            raise Degenerate("roll evaluation line is vertical")
        roll = math.atan2(d[1], d[0])

    pp = np.array([cam.cx, cam.cy])
    c, s = math.cos(-roll), math.sin(-roll)
    rot = np.array([[c, -s], [s, c]])

    def derot(p):
        return (p - pp) @ rot.T + pp

    vp_c = derot(vp)
    model = RangingModel(cam=cam, height=height, vp=vp_c)
    ground = [range_point(model, derot(p)) for p in pts]
    extra_px = [pts[0] + 0.25 * (vp - pts[0]), pts[2] + 0.25 * (vp - pts[2])]
    for p in extra_px:
        ground.append(range_point(model, derot(p)))
    h = fit_homography_dlt(np.vstack([pts, extra_px]), np.asarray(ground))
    return h, roll
