"""Online calibration while driving: sensor-to-IMU temporal offset by trace
correlation, hand-eye rotation/translation from paired relative motions, and
radar mount yaw from static-object Doppler returns.

The hand-eye solvers are shared between camera-IMU and LiDAR-IMU: both
consume relative-motion pairs of two rigidly attached sensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateMotion, IllConditioned, LowExcitation,
                     NoStaticObjects, VehicleStationary)
from .geom import Pose, Rotation


@dataclass(frozen=True)
class AngularRateTrack:
    """Timestamped 3-axis angular velocity (body frame, rad/s)."""

    stamps: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.stamps, dtype=float)
        w = np.asarray(self.rates, dtype=float).reshape(-1, 3)
        if len(t) != len(w):
            raise ValueError("stamps/rates length mismatch")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise ValueError("non-finite track values")
        object.__setattr__(self, "stamps", t)
        object.__setattr__(self, "rates", w)


@dataclass(frozen=True)
class RadarDetection:
    """One Doppler return: radial speed (m/s), bearing in the sensor frame
    (rad), range (m) and timestamp (s)."""

    v: float
    angle: float
    distance: float
    stamp: float

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be positive")


def rates_from_poses(stamps, rotations) -> AngularRateTrack:
    """Per-interval body angular velocity from a pose track:
    omega_k = log(R_k^T R_{k+1}) / dt, stamped at the interval midpoint."""
    stamps = np.asarray(stamps, dtype=float)
    out_t = []
    out_w = []
    for k in range(len(stamps) - 1):
        dt = stamps[k + 1] - stamps[k]
        rel = rotations[k].inverse() @ rotations[k + 1]
        out_t.append(0.5 * (stamps[k] + stamps[k + 1]))
        out_w.append(rel.as_rotvec() / dt)
    return AngularRateTrack(np.asarray(out_t), np.asarray(out_w))


# -- temporal offset ---------------------------------------------------------------


def _trace_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Normalized cross-correlation of the traces of the angular-velocity
    outer products, tr(w w^T) = |w|^2.

    The trace is invariant to each sensor's body frame, so the unknown
    extrinsic rotation between the two sensors cannot skew the peak (raw
    per-axis correlation mixes axes and biases the offset)."""
    ta = (a * a).sum(axis=1)
    tb = (b * b).sum(axis=1)
    ta = ta - ta.mean()
    tb = tb - tb.mean()
    den = math.sqrt(float(ta @ ta) * float(tb @ tb))
    if den < 1e-12:
        return 0.0
    return float(ta @ tb) / den


def temporal_offset(imu: AngularRateTrack, cam: AngularRateTrack,
                    search, min_excitation: float = 1e-3) -> float:
    """Best time offset td such that cam stamps + td align with IMU time,
    maximizing the trace correlation between the camera rates and the IMU
    rates averaged between consecutive camera frames. Parabolic refinement
    is applied when the candidate set is uniformly spaced."""
    search = np.sort(np.asarray(search, dtype=float))
    if cam.stamps[-1] - cam.stamps[0] < 5.0:
        raise LowExcitation("need >= 5 s of overlap")
    exc = float(np.var(np.linalg.norm(imu.rates, axis=1)))
    if exc < min_excitation:
        raise LowExcitation(f"angular-rate variance {exc:g} below "
                            f"{min_excitation:g}")

    cam_mid = cam.stamps
    dt_cam = float(np.median(np.diff(cam_mid)))

    def mean_imu_between(t0, t1):
        sel = (imu.stamps >= t0) & (imu.stamps < t1)
        if not sel.any():
            i = np.searchsorted(imu.stamps, 0.5 * (t0 + t1))
            i = min(max(i, 0), len(imu.stamps) - 1)
            return imu.rates[i]
        return imu.rates[sel].mean(axis=0)

    def corr(td):
        a = np.array([mean_imu_between(t + td - dt_cam / 2, t + td + dt_cam / 2)
                      for t in cam_mid])
        return _trace_correlation(a, cam.rates)

    scores = np.array([corr(td) for td in search])
    if scores.max() - scores.min() < 1e-9:
        raise LowExcitation("correlation is flat over the search window")
    k = int(np.argmax(scores))
    best = float(search[k])
    steps = np.diff(search)
    uniform = len(search) >= 3 and np.allclose(steps, steps[0], rtol=1e-6)
    if uniform and 0 < k < len(search) - 1:
        y0, y1, y2 = scores[k - 1], scores[k], scores[k + 1]
        denom = y0 - 2 * y1 + y2
        if abs(denom) > 1e-12:
            best += 0.5 * (y0 - y2) / denom * steps[0]
    return best


# -- hand-eye -----------------------------------------------------------------------


def handeye_rotation(motions) -> Rotation:
    """Solve R_a X = X R_b from paired relative rotations (R_a, R_b).

    Rotation axes satisfy axis_a = X axis_b; X is the Wahba/Kabsch solution
    over angle-weighted axis pairs. Raises DegenerateMotion when the motion
    axes span fewer than two directions."""
    aa, bb, weights = [], [], []
    for ra, rb in motions:
        axa, anga = ra.as_axis_angle()
        axb, angb = rb.as_axis_angle()
        if anga < 1e-8 or angb < 1e-8:
            continue
        aa.append(axa)
        bb.append(axb)
        weights.append(0.5 * (anga + angb))
    if len(aa) < 2:
        raise DegenerateMotion("need >= 2 motion pairs with rotation")
    a = np.asarray(aa)
    b = np.asarray(bb)
    w = np.asarray(weights)
    # require two well-separated axes
    cov_axes = (a * w[:, None]).T @ a
    if np.linalg.eigvalsh(cov_axes)[1] < 1e-6 * np.linalg.eigvalsh(cov_axes)[2]:
        raise DegenerateMotion("motion axes are collinear")
    h = (b * w[:, None]).T @ a
    u, s, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    x = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return Rotation(x)


def handeye_translation(motions, x: Rotation,
                        cond_limit: float = 1e6) -> np.ndarray:
    """Solve (R_a - I) t = X t_b - t_a stacked over motions.

    With X the rotation mapping sensor-b vectors into the sensor-a frame,
    t is the position of sensor b expressed in sensor a. `motions` is an
    iterable of (R_a, t_a, t_b). Raises IllConditioned when the stacked
    system's condition number exceeds cond_limit (e.g. rotation-free
    motion)."""
    rows = []
    rhs = []
    for ra, ta, tb in motions:
        rows.append(ra.matrix - np.eye(3))
        rhs.append(x.apply(np.asarray(tb, dtype=float))
                   - np.asarray(ta, dtype=float))
    if len(rows) < 3:
        raise DegenerateMotion("need >= 3 motions")
    a = np.vstack(rows)
    b = np.concatenate(rhs)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] < 1e-12 * max(s[0], 1.0):
        raise IllConditioned("left-hand side is rank deficient "
                             "(rotation-free motion)")
    cond = s[0] / s[-1]
    if cond > cond_limit:
        raise IllConditioned(f"condition number {cond:.3g} > {cond_limit:g}")
    t, *_ = np.linalg.lstsq(a, b, rcond=None)
    return t


def relative_motions(poses_a, poses_b):
    """Pairs of relative motions of two time-aligned pose tracks, shaped for
    handeye_rotation / handeye_translation: (R_a, R_b) and (R_a, t_a, t_b)."""
    rots = []
    trans = []
    for k in range(len(poses_a) - 1):
        rel_a = poses_a[k].inverse() @ poses_a[k + 1]
        rel_b = poses_b[k].inverse() @ poses_b[k + 1]
        rots.append((rel_a.rotation, rel_b.rotation))
        trans.append((rel_a.rotation, rel_a.translation, rel_b.translation))
    return rots, trans


# -- radar yaw ----------------------------------------------------------------------


def radar_yaw(detections, ego_speed, *, speed_gate: float = 2.0,
              static_gate: float = 0.5, min_moving_frac: float = 0.3,
              window_s: float = 1.0) -> float:
    """Radar mount yaw from static objects: V_i = V_e cos(angle_i + yaw).

    Rough yaw comes from the dead-ahead object (max |V_i|/V_e over a sliding
    window), a residual gate keeps static detections, then a 1-D Gauss-Newton
    fit of the cosine model returns the final yaw."""
    det_t = np.array([d.stamp for d in detections])
    det_v = np.array([d.v for d in detections])
    det_a = np.array([d.angle for d in detections])
    ts = np.asarray(ego_speed[0], dtype=float)
    vs = np.asarray(ego_speed[1], dtype=float)
    if np.mean(vs > speed_gate) < min_moving_frac:
        raise VehicleStationary(
            f"ego speed exceeds {speed_gate} m/s less than "
            f"{min_moving_frac:.0%} of the time")
    ve = np.interp(det_t, ts, vs)
    moving = ve > speed_gate
    if not moving.any():
        raise NoStaticObjects("no detections while moving")

    # rough yaw: strongest |V|/V_e ratio inside any 1 s window
    ratio = np.where(moving, np.abs(det_v) / np.maximum(ve, 1e-9), -np.inf)
    t0 = det_t.min()
    best_ratio, rough = -np.inf, 0.0
    for wstart in np.arange(t0, det_t.max() + 1e-9, window_s):
        sel = (det_t >= wstart) & (det_t < wstart + window_s) & moving
        if not sel.any():
            continue
        k = np.argmax(ratio[sel])
        if ratio[sel][k] > best_ratio:
            best_ratio = ratio[sel][k]
            rough = -det_a[sel][k]

    resid = det_v - ve * np.cos(det_a + rough)
    keep = moving & (np.abs(resid) < static_gate)
    if not keep.any():
        raise NoStaticObjects("static residual gate kept no detections")
    v, a, w = det_v[keep], det_a[keep], ve[keep]

    yaw = rough
    for _ in range(20):
        r = v - w * np.cos(a + yaw)
        j = w * np.sin(a + yaw)
        denom = float(j @ j)
        if denom < 1e-12:
            break
        step = float(j @ r) / denom
        yaw -= step
        if abs(step) < 1e-12:
            break
    return float(yaw)
