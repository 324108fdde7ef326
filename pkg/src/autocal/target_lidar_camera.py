"""Joint target-based LiDAR-camera calibration: Zhang-style intrinsic
initialization from board homographies, then damped-least-squares
refinement of intrinsics, per-view board poses and the LiDAR-to-camera
extrinsic, minimizing the weighted sum of the checkerboard reprojection
cost and the circle-center reprojection cost (defaults alpha=1, beta=60)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateViews, NoConvergence
from .geom import (CameraModel, Pose, Rotation, fit_homography_dlt,
                   planar_pose_from_homography, project)
from .optimize import damped_least_squares
from .result import CalibResult


@dataclass(frozen=True)
class ViewObservation:
    """One board placement seen by both sensors."""

    corners_px: np.ndarray          # (N, 2) detected checkerboard corners
    board_corners: np.ndarray       # (N, 3) board-frame coordinates (z=0)
    circle_centers_lidar: np.ndarray  # (M, 3) hole centers, LiDAR frame
    circle_centers_board: np.ndarray  # (M, 3) hole centers, board frame
    predicted_centers_px: np.ndarray | None = None  # (M, 2) from geometry


@dataclass(frozen=True)
class JointObservation:
    views: list

    def __post_init__(self):
        if not self.views:
            raise ValueError("no views")
        n = len(self.views[0].corners_px)
        if any(len(v.corners_px) != n for v in self.views):
            raise ValueError("corner count differs across views")


@dataclass(frozen=True)
class JointWeights:
    alpha: float = 1.0
    beta: float = 60.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("weights must be positive")


# -- Zhang initialization -------------------------------------------------------------


def _v_ij(h: np.ndarray, i: int, j: int) -> np.ndarray:
    return np.array([
        h[0, i] * h[0, j],
        h[0, i] * h[1, j] + h[1, i] * h[0, j],
        h[1, i] * h[1, j],
        h[2, i] * h[0, j] + h[0, i] * h[2, j],
        h[2, i] * h[1, j] + h[1, i] * h[2, j],
        h[2, i] * h[2, j],
    ])


def estimate_intrinsics_zhang(corner_views, board_points, width: int,
                              height: int, refine: bool = True) -> CameraModel:
    """Closed-form intrinsics from >= 3 board views (absolute-conic linear
    system), distortion initialized at zero and refined by reprojection
    minimization over intrinsics and per-view poses."""
    if len(corner_views) < 3:
        raise DegenerateViews(f"need >= 3 views, got {len(corner_views)}")
    bp = np.asarray(board_points, dtype=float)
    if bp.shape[1] == 3:
        bp = bp[:, :2]
    homographies = [fit_homography_dlt(bp, np.asarray(c, dtype=float))
                    for c in corner_views]
    rows = []
    for h in homographies:
        m = h.matrix
        rows.append(_v_ij(m, 0, 1))
        rows.append(_v_ij(m, 0, 0) - _v_ij(m, 1, 1))
    v = np.asarray(rows)
    _, s, vt = np.linalg.svd(v)
    if s[-1] > 1e-6 * s[0] and len(corner_views) == 3:
        pass  # three views give exactly rank 6-1; noise keeps s[-1] small
    b = vt[-1]
    b11, b12, b22, b13, b23, b33 = b
    denom = b11 * b22 - b12 ** 2
    if abs(denom) < 1e-16 or abs(b11) < 1e-16:
        raise DegenerateViews("absolute-conic system is rank-deficient "
                              "(parallel board poses?)")
    v0 = (b12 * b13 - b11 * b23) / denom
    lam = b33 - (b13 ** 2 + v0 * (b12 * b13 - b11 * b23)) / b11
    if lam / b11 <= 0 or lam * b11 / denom <= 0:
        raise DegenerateViews("conic estimate is not positive definite")
    alpha = math.sqrt(lam / b11)
    beta = math.sqrt(lam * b11 / denom)
    gamma = -b12 * alpha ** 2 * beta / lam
    u0 = gamma * v0 / beta - b13 * alpha ** 2 / lam
    cam = CameraModel(fx=alpha, fy=beta,
                      cx=float(np.clip(u0, 0, width - 1)),
                      cy=float(np.clip(v0, 0, height - 1)),
                      width=width, height=height)
    if not refine:
        return cam

    poses = [planar_pose_from_homography(cam, h) for h in homographies]
    bp3 = np.column_stack([bp, np.zeros(len(bp))])
    n_views = len(poses)

    def unpack(params):
        c = CameraModel(fx=params[0], fy=params[1], cx=params[2],
                        cy=params[3], k1=params[4], k2=params[5],
                        p1=params[6], p2=params[7], k3=params[8],
                        width=width, height=height)
        pz = []
        for i in range(n_views):
            o = 9 + 6 * i
            pz.append(Pose(poses[i].rotation
                           @ Rotation.from_rotvec(params[o:o + 3]),
                           poses[i].translation + params[o + 3:o + 6]))
        return c, pz

    def residuals(params):
        c, pz = unpack(params)
        res = []
        for corners, pose in zip(corner_views, pz):
            uv = project(c, pose.transform(bp3))
            res.append((uv - corners).ravel())
        return np.concatenate(res)

    x0 = np.zeros(9 + 6 * n_views)
    x0[:4] = [cam.fx, cam.fy, cam.cx, cam.cy]
    opt = damped_least_squares(residuals, x0, max_iters=60, cost_tol=1e-12)
    refined, _ = unpack(opt.x)
    return refined


# -- joint costs -----------------------------------------------------------------------


def _component_cost(uv: np.ndarray, uv_det: np.ndarray) -> float:
    """Sum over points of |u - u_det| + |v - v_det|."""
    return float(np.abs(uv - uv_det).sum())


def j_board(obs: JointObservation, cam: CameraModel, board_poses) -> float:
    """Checkerboard-corner reprojection cost of all views."""
    total = 0.0
    for view, pose in zip(obs.views, board_poses):
        uv = project(cam, pose.transform(view.board_corners))
        total += _component_cost(uv, view.corners_px)
    return total


def j_lidar(obs: JointObservation, cam: CameraModel, extrinsic: Pose,
            board_poses=None) -> float:
    """Circle-center reprojection cost: LiDAR centers projected through
    (extrinsic, cam) against the centers predicted from board geometry.
    When `board_poses` is given the predictions are recomputed from the
    current poses; otherwise each view must carry predictions."""
    total = 0.0
    for i, view in enumerate(obs.views):
        if len(view.circle_centers_lidar) == 0:
            continue
        uv = project(cam, extrinsic.transform(view.circle_centers_lidar))
        if board_poses is not None:
            uv_det = project(cam, board_poses[i].transform(
                view.circle_centers_board))
        elif view.predicted_centers_px is not None:
            uv_det = view.predicted_centers_px
        else:
            raise ValueError("no board poses and no stored predictions")
        total += _component_cost(uv, uv_det)
    return total


def calibrate_joint(obs: JointObservation, weights: JointWeights,
                    init_cam: CameraModel, init_extrinsic: Pose, *,
                    max_iters: int = 200, cost_tol: float = 1e-8,
                    optimize_distortion: bool = False) -> CalibResult:
    """Minimize alpha*J_board + beta*J_lidar over intrinsics, board poses
    and the LiDAR-camera extrinsic.

    Search directions come from damped least squares on the signed,
    weight-scaled residual components (numeric central-difference
    Jacobians); a step is accepted only when the true weighted cost
    decreases, so the reported cost history is non-increasing.

    Distortion stays frozen at the initial model unless
    `optimize_distortion` is set: the heavily weighted circle term rests on
    a handful of points per view, and letting distortion float lets it
    absorb their noise with wildly unphysical coefficients. The Zhang
    initialization already fits distortion from every corner."""
    width, height = init_cam.width, init_cam.height
    init_poses = []
    for view in obs.views:
        h = fit_homography_dlt(view.board_corners[:, :2], view.corners_px)
        init_poses.append(planar_pose_from_homography(init_cam, h))
    n_views = len(obs.views)
    sa, sb = math.sqrt(weights.alpha), math.sqrt(weights.beta)

    def unpack(params):
        k = params[4:9] if optimize_distortion else init_cam.distortion
        cam = CameraModel(fx=params[0], fy=params[1], cx=params[2],
                          cy=params[3], k1=k[0], k2=k[1], p1=k[2], p2=k[3],
                          k3=k[4], width=width, height=height)
        ext = Pose(init_extrinsic.rotation
                   @ Rotation.from_rotvec(params[9:12]),
                   init_extrinsic.translation + params[12:15])
        poses = []
        for i in range(n_views):
            o = 15 + 6 * i
            poses.append(Pose(init_poses[i].rotation
                              @ Rotation.from_rotvec(params[o:o + 3]),
                              init_poses[i].translation + params[o + 3:o + 6]))
        return cam, ext, poses

    def residuals(params):
        cam, ext, poses = unpack(params)
        res = []
        for view, pose in zip(obs.views, poses):
            uv = project(cam, pose.transform(view.board_corners))
            res.append(sa * (uv - view.corners_px).ravel())
            if len(view.circle_centers_lidar):
                uvl = project(cam, ext.transform(view.circle_centers_lidar))
                uvd = project(cam, pose.transform(view.circle_centers_board))
                res.append(sb * (uvl - uvd).ravel())
        return np.concatenate(res)

    def j_sum(params):
        cam, ext, poses = unpack(params)
        return weights.alpha * j_board(obs, cam, poses) \
            + weights.beta * j_lidar(obs, cam, ext, poses)

    x0 = np.zeros(15 + 6 * n_views)
    x0[:4] = [init_cam.fx, init_cam.fy, init_cam.cx, init_cam.cy]
    if optimize_distortion:
        x0[4:9] = init_cam.distortion
    opt = damped_least_squares(residuals, x0, max_iters=max_iters,
                               cost_tol=cost_tol, cost_floor=1e-6,
                               monitor_fn=j_sum)
    cam, ext, poses = unpack(opt.x)
    result = CalibResult(
        tool="board-lidar-camera", pose=ext, camera=cam,
        residuals={
            "j_board": j_board(obs, cam, poses),
            "j_lidar": j_lidar(obs, cam, ext, poses),
            "j_sum": opt.cost,
            "j_sum_history": [float(c) for c in opt.cost_history],
        },
        iterations=opt.iterations, converged=opt.converged,
        extra={"alpha": weights.alpha, "beta": weights.beta})
    if not opt.converged:
        raise NoConvergence(f"no convergence in {max_iters} iterations",
                            best=result)
    return result
