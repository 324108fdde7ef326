"""LiDAR-to-LiDAR extrinsic calibration pipeline: ground-plane alignment
(roll, pitch, z), yaw/x/y grid search over nearest-neighbor distances in
the ground plane, point-to-plane ICP with normal gating, and a final local
scan minimizing the octree occupancy volume of the merged cloud."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import (GROUND_CONSTRAINT, GroundPlane, Octree, PointCloud,
                    ransac_plane)
from .errors import (DegenerateNormals, EmptyNonGround, NoCorrespondences)
from .geom import Pose, Rotation, rodrigues
from .result import CalibResult


@dataclass(frozen=True)
class GroundSplit:
    ground: PointCloud
    non_ground: PointCloud
    plane: GroundPlane


def split_ground(cloud: PointCloud, eps: float = 0.05,
                 seed: int = 0) -> GroundSplit:
    plane = ransac_plane(cloud, eps=eps, max_iters=300,
                         constraint=GROUND_CONSTRAINT, seed=seed)
    mask = np.zeros(len(cloud), dtype=bool)
    mask[plane.inlier_indices] = True
    return GroundSplit(ground=cloud.select(mask),
                       non_ground=cloud.select(~mask), plane=plane)


@dataclass(frozen=True)
class SearchGrid:
    yaw_range_deg: float = 45.0
    yaw_step_deg: float = 1.5
    xy_range_m: float = 2.0
    xy_step_m: float = 0.25
    gate_m: float = 1.0
    max_points: int = 1500


def ground_align(gp_master: GroundPlane, gp_slave: GroundPlane,
                 slave_cloud: PointCloud, eps: float = 0.05) -> Pose:
    """Roll/pitch/z transform rotating the slave ground normal onto the
    master's, translation along z from the plane offsets. The pi-flip
    ambiguity is resolved by requiring most slave ground points to land on
    the master plane after the transform."""
    nm = gp_master.normal
    ns = gp_slave.normal
    if ns @ nm < 0:
        gp_slave = gp_slave.flipped()
        ns = gp_slave.normal

    cross = np.cross(nm, ns)
    sin_t = np.linalg.norm(cross)
    cos_t = float(np.clip(nm @ ns, -1.0, 1.0))
    theta = math.atan2(sin_t, cos_t)
    if sin_t < 1e-12:
        rot = Rotation.identity()
    else:
        # rotate about nm x ns by -theta to bring ns onto nm
        rot = rodrigues(cross / sin_t, -theta)
    if np.linalg.norm(rot.apply(ns) - nm) > 1e-6:
        rot = rodrigues(cross / sin_t, theta)
    if np.linalg.norm(rot.apply(ns) - nm) > 1e-6:
        raise DegenerateNormals("could not align plane normals")

    # rotation keeps the slave plane offset d_s; push it onto d_m along z
    if abs(nm[2]) < 1e-6:
        raise DegenerateNormals("master ground normal has no z component")
    tz = (gp_slave.d - gp_master.d) / nm[2]
    pose = Pose(rot, np.array([0.0, 0.0, tz]))

    ground_pts = slave_cloud.xyz[gp_slave.inlier_indices]
    moved = pose.transform(ground_pts)
    frac = np.mean(np.abs(gp_master.distances(moved)) <= 3 * eps)
    if frac < 0.5:
        raise DegenerateNormals(
            f"only {frac:.0%} of slave ground lands on the master plane")
    return pose


def yaw_xy_search(master_ng: PointCloud, slave_ng: PointCloud,
                  grid: SearchGrid = SearchGrid(), seed: int = 0):
    """(yaw, x, y) minimizing the summed in-plane nearest-neighbor distance
    (gate-truncated) between the transformed slave and the master, coarse
    grid followed by a refined pass around the best node."""
    if len(master_ng) == 0 or len(slave_ng) == 0:
        raise EmptyNonGround("non-ground cloud is empty")
    rng = np.random.default_rng(seed)
    s_xyz = slave_ng.xyz
    if len(s_xyz) > grid.max_points:
        s_xyz = s_xyz[rng.choice(len(s_xyz), grid.max_points, replace=False)]
    from scipy.spatial import cKDTree
    tree2d = cKDTree(master_ng.xyz[:, :2])
    sx, sy = s_xyz[:, 0], s_xyz[:, 1]

    def cost(yaw, x, y):
        c, s = math.cos(yaw), math.sin(yaw)
        q = np.column_stack([c * sx - s * sy + x, s * sx + c * sy + y])
        d, _ = tree2d.query(q, distance_upper_bound=grid.gate_m)
        d = np.where(np.isfinite(d), d, grid.gate_m)
        return float(d.sum())

    def scan(yaws, xs, ys):
        best = (math.inf, 0.0, 0.0, 0.0)
        for yw in yaws:
            for xv in xs:
                for yv in ys:
                    c = cost(yw, xv, yv)
                    if c < best[0]:
                        best = (c, yw, xv, yv)
        return best

    yr = math.radians(grid.yaw_range_deg)
    ys = math.radians(grid.yaw_step_deg)
    _, yaw, x, y = scan(np.arange(-yr, yr + ys / 2, ys),
                        np.arange(-grid.xy_range_m,
                                  grid.xy_range_m + grid.xy_step_m / 2,
                                  grid.xy_step_m),
                        np.arange(-grid.xy_range_m,
                                  grid.xy_range_m + grid.xy_step_m / 2,
                                  grid.xy_step_m))
    # refinement: quarter steps across +-1 coarse cell
    ys2, xy2 = ys / 4, grid.xy_step_m / 4
    _, yaw, x, y = scan(np.arange(yaw - ys, yaw + ys + ys2 / 2, ys2),
                        np.arange(x - grid.xy_step_m,
                                  x + grid.xy_step_m + xy2 / 2, xy2),
                        np.arange(y - grid.xy_step_m,
                                  y + grid.xy_step_m + xy2 / 2, xy2))
    return float(yaw), float(x), float(y)


def _normals_knn(xyz: np.ndarray, k: int = 10) -> np.ndarray:
    from scipy.spatial import cKDTree
    tree = cKDTree(xyz)
    _, idx = tree.query(xyz, k=min(k, len(xyz)))
    nrm = np.empty_like(xyz)
    for i in range(len(xyz)):
        p = xyz[idx[i]]
        q = p - p.mean(axis=0)
        _, v = np.linalg.eigh(q.T @ q)
        nrm[i] = v[:, 0]
    return nrm


def point_to_plane_rms(master: PointCloud, slave: PointCloud, pose: Pose,
                       gate: float = 1.0) -> float:
    """Diagnostic: RMS point-to-plane distance of gated correspondences."""
    normals = _normals_knn(master.xyz)
    moved = pose.transform(slave.xyz)
    d, idx = master.tree().query(moved, distance_upper_bound=gate)
    ok = np.isfinite(d)
    if not ok.any():
        raise NoCorrespondences("no correspondences within the gate")
    resid = ((moved[ok] - master.xyz[idx[ok]]) * normals[idx[ok]]).sum(axis=1)
    return float(np.sqrt((resid ** 2).mean()))


def icp_refine(master: PointCloud, slave: PointCloud, init: Pose,
               max_iters: int = 40, gate: float = 1.0,
               normal_gate_cos: float = 0.8, tol: float = 1e-6) -> Pose:
    """Point-to-plane ICP with normal-compatibility gating.

    Master normals come from 10-NN PCA; a correspondence is kept when the
    nearest master point is within `gate` meters and the rotated slave
    normal agrees with the master normal (|cos| > normal_gate_cos)."""
    m_xyz = master.xyz
    m_normals = _normals_knn(m_xyz)
    s_normals = _normals_knn(slave.xyz)
    tree = master.tree()
    pose = init
    prev_err = None
    for it in range(max_iters):
        moved = pose.transform(slave.xyz)
        d, idx = tree.query(moved, distance_upper_bound=gate)
        ok = np.isfinite(d)
        if ok.sum() < 6:
            raise NoCorrespondences(
                f"{int(ok.sum())} correspondences within {gate} m")
        rs_normals = s_normals @ pose.rotation.matrix.T
        compat = np.abs((rs_normals[ok] * m_normals[idx[ok]]).sum(axis=1)) \
            > normal_gate_cos
        sel = np.nonzero(ok)[0][compat]
        if len(sel) < 6:
            raise NoCorrespondences("normal gate rejected all matches")
        p = moved[sel]
        q = m_xyz[idx[sel]]
        n = m_normals[idx[sel]]
        r = ((p - q) * n).sum(axis=1)
        jac = np.hstack([np.cross(p, n), n])      # d r / d (omega, t)
        h = jac.T @ jac
        g = jac.T @ r
        try:
            delta = np.linalg.solve(h + 1e-9 * np.eye(6), -g)
        except np.linalg.LinAlgError:
            break
        inc = Pose(Rotation.from_rotvec(delta[:3]), delta[3:])
        pose = inc @ pose
        err = float(np.sqrt((r ** 2).mean()))
        if prev_err is not None and abs(prev_err - err) \
                <= tol * max(prev_err, 1e-12):
            break
        prev_err = err
    return pose


def octree_refine(master: PointCloud, slave: PointCloud, init: Pose,
                  min_side: float = 0.15, rot_range_deg: float = 0.5,
                  trans_range_m: float = 0.05, passes: int = 3):
    """Local 6-DoF coordinate scan within +-rot_range/+-trans_range of the
    initial pose, minimizing the octree occupancy volume of the merged
    cloud (root cube held fixed so volumes are comparable).

    The volume is a voxel count, so it is piecewise constant; a move is
    accepted only when it removes at least two leaf volumes, which keeps
    sampling noise from walking the pose around the plateau. Returns
    (pose, volume_before, volume_after); the returned pose never measures
    worse than the initial one."""
    m_xyz = master.xyz
    lo = np.minimum(m_xyz.min(axis=0), init.transform(slave.xyz).min(axis=0))
    hi = np.maximum(m_xyz.max(axis=0), init.transform(slave.xyz).max(axis=0))
    root = ((lo + hi) / 2, float((hi - lo).max()) * 1.1 + 2 * min_side)

    def volume(pose):
        merged = np.vstack([m_xyz, pose.transform(slave.xyz)])
        return Octree.build(PointCloud(merged), min_side, root=root).volume

    rotvec = np.zeros(3)
    trans = np.zeros(3)
    r_max = math.radians(rot_range_deg)
    t_max = trans_range_m

    def pose_of(rv, tv):
        return Pose(init.rotation @ Rotation.from_rotvec(rv),
                    init.translation + tv)

    vol_init = volume(init)
    best = vol_init
    leaf = Octree.build(PointCloud(m_xyz[:1]), min_side,
                        root=root).leaf_side ** 3
    # hysteresis against plateau noise: demand a material volume drop
    gain = max(2 * leaf, 2e-3 * vol_init)
    r_step = r_max / 2
    t_step = t_max / 2
    for _ in range(passes):
        improved = True
        while improved:
            improved = False
            for axis in range(3):
                for sgn in (1.0, -1.0):
                    rv = rotvec.copy()
                    rv[axis] = np.clip(rv[axis] + sgn * r_step,
                                       -r_max, r_max)
                    v = volume(pose_of(rv, trans))
                    if v < best - gain:
                        best, rotvec, improved = v, rv, True
                    tv = trans.copy()
                    tv[axis] = np.clip(tv[axis] + sgn * t_step,
                                       -t_max, t_max)
                    v = volume(pose_of(rotvec, tv))
                    if v < best - gain:
                        best, trans, improved = v, tv, True
        r_step /= 2
        t_step /= 2
    return pose_of(rotvec, trans), vol_init, best


def calibrate_pair(master: PointCloud, slave: PointCloud, eps: float = 0.05,
                   grid: SearchGrid = SearchGrid(), *, seed: int = 0,
                   octree_min_side: float = 0.15) -> CalibResult:
    """Full pipeline; the result carries per-stage diagnostics including the
    point-to-plane RMS before/after ICP and the octree volume before/after
    the volume refinement."""
    ms = split_ground(master, eps, seed=seed)
    ss = split_ground(slave, eps, seed=seed + 1)
    p0 = ground_align(ms.plane, ss.plane, slave, eps)

    slave_ng_aligned = ss.non_ground.transformed(p0)
    yaw, x, y = yaw_xy_search(ms.non_ground, slave_ng_aligned, grid,
                              seed=seed)
    p1 = Pose(Rotation.from_euler_zyx(yaw, 0, 0), [x, y, 0.0]) @ p0

    rms_before = point_to_plane_rms(ms.non_ground, ss.non_ground, p1,
                                    grid.gate_m)
    p2 = icp_refine(ms.non_ground, ss.non_ground, p1, gate=grid.gate_m)
    rms_after = point_to_plane_rms(ms.non_ground, ss.non_ground, p2,
                                   grid.gate_m)

    p3, vol_before, vol_after = octree_refine(master, slave, p2,
                                              min_side=octree_min_side)

    return CalibResult(
        tool="lidar2lidar", pose=p3,
        residuals={
            "ground_align_deg": math.degrees(
                Rotation.identity().angle_to(p0.rotation)),
            "yaw_search_deg": math.degrees(yaw),
            "icp_rms_before": rms_before,
            "icp_rms_after": rms_after,
            "octree_volume_before": vol_before,
            "octree_volume_after": vol_after,
        },
        seed=seed, converged=True)

