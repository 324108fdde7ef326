"""LiDAR-IMU extrinsic calibration: rough hand-eye initialization from
odometry tracks, then sliding-window refinement that chains LiDAR frames
into a local map through the candidate extrinsic and minimizes planar
feature costs over adaptive voxels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import DegenerateMotion, EmptyFeature, InsufficientFeatures
from .geom import Pose, Rotation
from .online import handeye_rotation
from .optimize import damped_least_squares, numeric_jacobian
from .result import CalibResult

PLANE_RATIO = 0.1    # plane iff lam3/lam2 < 0.1
EDGE_RATIO = 0.1     # edge iff lam2/lam1 < 0.1 and not plane
MIN_VOXEL_POINTS = 15
MIN_VOXEL_SIDE = 0.125


@dataclass(frozen=True)
class StampedPose:
    stamp: float
    pose: Pose


def _check_track(track):
    stamps = np.array([s.stamp for s in track])
    if np.any(np.diff(stamps) <= 0):
        raise ValueError("track timestamps must be strictly increasing")
    return stamps


@dataclass(frozen=True)
class VoxelFeature:
    """Classified voxel: covariance eigenvalues lam1 >= lam2 >= lam3,
    unit normal (plane) or direction (edge), and member centroid."""

    lo: np.ndarray
    side: float
    indices: np.ndarray
    eigenvalues: np.ndarray
    kind: str           # 'plane' | 'edge'
    n: np.ndarray
    q: np.ndarray


def plane_cost(points, n, q) -> float:
    """(1/N) * sum of squared point-to-plane distances n^T (p_i - q)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyFeature("no points in feature")
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise ValueError("normal must be unit length")
    d = (pts - np.asarray(q, dtype=float)) @ n
    return float((d * d).mean())


def _classify(pts: np.ndarray):
    """(kind, eigenvalues desc, vector, centroid) or None."""
    c = pts.mean(axis=0)
    q = pts - c
    cov = q.T @ q / len(pts)
    w, v = np.linalg.eigh(cov)           # ascending
    lam3, lam2, lam1 = w[0], w[1], w[2]
    eps = 1e-12 * max(lam1, 1e-12)
    if (lam3 + eps) / (lam2 + eps) < PLANE_RATIO:
        return "plane", np.array([lam1, lam2, lam3]), v[:, 0], c
    if (lam2 + eps) / (lam1 + eps) < EDGE_RATIO:
        return "edge", np.array([lam1, lam2, lam3]), v[:, 2], c
    return None


def adaptive_voxelize(local_map: PointCloud, start_side: float = 1.0,
                      min_side: float = MIN_VOXEL_SIDE) -> list[VoxelFeature]:
    """Iteratively split voxels from `start_side` until the members classify
    as plane/edge or the voxel is discarded at `min_side`."""
    xyz = local_map.xyz
    if len(xyz) == 0:
        return []
    out: list[VoxelFeature] = []

    def visit(indices: np.ndarray, lo: np.ndarray, side: float):
        if len(indices) < MIN_VOXEL_POINTS:
            return
        pts = xyz[indices]
        cls = _classify(pts)
        if cls is not None:
            kind, lams, vec, cen = cls
            out.append(VoxelFeature(lo=lo, side=side, indices=indices,
                                    eigenvalues=lams, kind=kind,
                                    n=vec / np.linalg.norm(vec), q=cen))
            return
        if side / 2 < min_side - 1e-12:
            return
        half = side / 2
        rel = pts - lo
        octant = ((rel[:, 0] >= half).astype(int)
                  + 2 * (rel[:, 1] >= half).astype(int)
                  + 4 * (rel[:, 2] >= half).astype(int))
        for o in range(8):
            sel = octant == o
            if not sel.any():
                continue
            off = np.array([o & 1, (o >> 1) & 1, (o >> 2) & 1]) * half
            visit(indices[sel], lo + off, half)

    lo0 = np.floor(xyz.min(axis=0) / start_side) * start_side
    cell = np.floor((xyz - lo0) / start_side).astype(np.int64)
    cells, inverse = np.unique(cell, axis=0, return_inverse=True)
    for ci in range(len(cells)):
        idx = np.nonzero(inverse == ci)[0]
        visit(idx, lo0 + cells[ci] * start_side, start_side)
    return out


# -- rough initialization -------------------------------------------------------------


def _pair_tracks(imu_track, lidar_track, max_dt: float = 0.010):
    """Nearest-stamp pairing of two pose tracks within max_dt."""
    it = _check_track(imu_track)
    lt = _check_track(lidar_track)
    pairs = []
    for j, t in enumerate(lt):
        i = int(np.argmin(np.abs(it - t)))
        if abs(it[i] - t) <= max_dt:
            pairs.append((imu_track[i].pose, lidar_track[j].pose))
    return pairs


def handeye_init(imu_track, lidar_track) -> Pose:
    """Rough LiDAR-in-IMU extrinsic: rotation from relative-motion hand-eye,
    translation from stacked linear least squares over the pose tracks.

    Both tracks are sensor-to-world odometry of rigidly attached sensors;
    each is re-expressed in its own start frame, where
    T_L(t) = X^-1 T_I(t) X holds exactly. Requires rotation about at least
    two axes."""
    pairs = _pair_tracks(imu_track, lidar_track)
    if len(pairs) < 10:
        raise DegenerateMotion(f"only {len(pairs)} time-aligned pose pairs")
    i0_inv = pairs[0][0].inverse()
    l0_inv = pairs[0][1].inverse()
    pairs = [(i0_inv @ pi, l0_inv @ pl) for pi, pl in pairs]
    motions = []
    stride = max(1, len(pairs) // 80)
    for k in range(0, len(pairs) - stride, stride):
        rel_i = pairs[k][0].inverse() @ pairs[k + stride][0]
        rel_l = pairs[k][1].inverse() @ pairs[k + stride][1]
        motions.append((rel_i.rotation, rel_l.rotation))
    x_rot = handeye_rotation(motions)

    # T_L(t) = X^-1 T_I(t) X  =>  (R_I(t) - I) t_X = R_X p_L(t) - p_I(t)
    rows, rhs = [], []
    for pi, pl in pairs:
        rows.append(pi.rotation.matrix - np.eye(3))
        rhs.append(x_rot.apply(pl.translation) - pi.translation)
    a = np.vstack(rows)
    b = np.concatenate(rhs)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] < 1e-6 * max(s[0], 1e-12):
        raise DegenerateMotion("translation unobservable: rotation spans "
                               "fewer than two axes")
    t, *_ = np.linalg.lstsq(a, b, rcond=None)
    return Pose(x_rot, t)


# -- windowed refinement ----------------------------------------------------------------


def _interp_pose(track, stamps, t):
    """Piecewise pose interpolation (slerp via rotation vectors)."""
    i = int(np.searchsorted(stamps, t))
    if i == 0:
        return track[0].pose
    if i >= len(stamps):
        return track[-1].pose
    t0, t1 = stamps[i - 1], stamps[i]
    a = (t - t0) / (t1 - t0)
    p0, p1 = track[i - 1].pose, track[i].pose
    rel = p0.rotation.inverse() @ p1.rotation
    rot = p0.rotation @ Rotation.from_rotvec(rel.as_rotvec() * a)
    trans = (1 - a) * p0.translation + a * p1.translation
    return Pose(rot, trans)


def _window_map(frames, imu_poses, x: Pose) -> np.ndarray:
    """Chain window frames into the first frame's LiDAR coordinates through
    the candidate extrinsic: T_{O->P} = X^-1 T_P^-1 T_O X."""
    t_p_inv = imu_poses[0].inverse()
    xinv = x.inverse()
    parts = []
    for cloud, t_o in zip(frames, imu_poses):
        rel = xinv @ t_p_inv @ t_o @ x
        parts.append(rel.transform(cloud.xyz))
    return np.vstack(parts)


def calibrate(imu_track, lidar_frames, init: Pose, window: int = 20,
              stride: int = 10, max_window_iters: int = 10,
              min_plane_voxels: int = 10, increment_prior: float = 0.6,
              forget: float = 0.8) -> CalibResult:
    """Sliding-window refinement of the LiDAR-to-IMU extrinsic.

    `lidar_frames` is a list of (stamp, PointCloud in LiDAR frame). Per
    window the frames are chained into a local map with the current
    extrinsic, plane voxels are extracted once, and the extrinsic is refined
    by damped least squares on the stacked point-to-plane residuals (the
    plane of each voxel is re-fit in closed form per evaluation).

    Each window's increment carries a Gaussian prior built from the
    information matrix accumulated over previous windows (recursive
    Gauss-Newton): directions a window does not observe (translation needs
    in-window rotation via the lever arm) are pinned by what earlier
    windows established, while genuinely unobserved directions stay free
    until a window finally measures them. `increment_prior` seeds the
    initial diagonal."""
    stamps = _check_track(imu_track)
    x = init
    frame_stamps = [t for t, _ in lidar_frames]
    frame_clouds = [c for _, c in lidar_frames]
    n = len(lidar_frames)
    windows = [(s, min(s + window, n)) for s in range(0, max(n - window + 1, 1),
                                                      stride)]
    if len(windows) < 3:
        raise ValueError("need >= 3 windows; provide more frames or a "
                         "smaller window")
    total_iters = 0
    costs = []
    info = increment_prior ** 2 * np.eye(6)
    for w0, w1 in windows:
        frames = frame_clouds[w0:w1]
        imu_poses = [_interp_pose(imu_track, stamps, t)
                     for t in frame_stamps[w0:w1]]
        frame_of = np.repeat(np.arange(len(frames)),
                             [len(c) for c in frames])
        feats = []
        for f in adaptive_voxelize(PointCloud(
                _window_map(frames, imu_poses, x))):
            if f.kind != "plane":
                continue
            # voxels dominated by one frame are extrinsic-invariant ballast
            counts = np.bincount(frame_of[f.indices])
            if (counts > 0).sum() < 3 or counts.max() > 0.8 * len(f.indices):
                continue
            feats.append(f)
        if len(feats) < min_plane_voxels:
            raise InsufficientFeatures(
                f"window {w0}:{w1} has {len(feats)} plane voxels")

        sizes = np.array([len(f.indices) for f in feats])

        def voxel_lam3(pose):
            pts = _window_map(frames, imu_poses, pose)
            out = np.empty(len(feats))
            for i, (f, m) in enumerate(zip(feats, sizes)):
                p = pts[f.indices]
                q = p - p.mean(axis=0)
                out[i] = np.linalg.eigvalsh(q.T @ q / m)[0]
            return out

        prior_chol = np.linalg.cholesky(info)

        def make_residuals(weights, with_prior=True):
            def residuals(params):
                cand = Pose(x.rotation @ Rotation.from_rotvec(params[:3]),
                            x.translation + params[3:])
                pts = _window_map(frames, imu_poses, cand)
                res = []
                for f, m, wgt in zip(feats, sizes, weights):
                    p = pts[f.indices]
                    q = p - p.mean(axis=0)
                    cov = q.T @ q / m
                    wv, vv = np.linalg.eigh(cov)
                    res.append(wgt * (q @ vv[:, 0]) / math.sqrt(m))
                if with_prior:
                    res.append(prior_chol.T @ params)
                return np.concatenate(res)
            return residuals

        # stage 1 (skipped once the map is crisp): uniform weights pull the
        # blurred map toward crispness
        lam3 = voxel_lam3(x)
        stage1_iters = 0
        if float(np.median(lam3)) > 2.5e-5:
            opt = damped_least_squares(make_residuals(np.ones(len(feats))),
                                       np.zeros(6),
                                       max_iters=max_window_iters,
                                       cost_tol=1e-10)
            x = Pose(x.rotation @ Rotation.from_rotvec(opt.x[:3]),
                     x.translation + opt.x[3:])
            stage1_iters = opt.iterations
            lam3 = voxel_lam3(x)
        # stage 2: adaptive-floor IRLS polish; contaminated voxels are
        # crushed relative to the crisp majority, so a clean map is a
        # fixed point of the window update
        floor = max(float(np.median(lam3)), 1e-9)
        weights = 1.0 / np.sqrt(lam3 ** 2 + floor ** 2)
        weights /= weights.max()
        opt2 = damped_least_squares(make_residuals(weights), np.zeros(6),
                                    max_iters=max_window_iters,
                                    cost_tol=1e-10)
        x = Pose(x.rotation @ Rotation.from_rotvec(opt2.x[:3]),
                 x.translation + opt2.x[3:])
        # fold this window's measurement information into the running
        # prior; the forgetting factor bounds how hard early (possibly
        # still-biased) windows can pin later ones
        jac = numeric_jacobian(make_residuals(weights, with_prior=False),
                               np.zeros(6))
        info = forget * info + jac.T @ jac
        total_iters += stage1_iters + opt2.iterations
        costs.append(opt2.cost)
    return CalibResult(tool="lidar2imu", pose=x,
                       residuals={"window_costs": costs,
                                  "final_cost": costs[-1]},
                       iterations=total_iters, converged=True)
