"""Ground-truth synthetic data: desk-scale scenes (ground, lanes, poles,
walls, calibration boards), trajectories, and per-sensor sampling at the
recording rates used throughout (IMU 100 Hz, LiDAR 10 Hz, camera 10 Hz,
radar 20 Hz).

Every generator takes an explicit seed and the CLI variants emit a sidecar
ground-truth JSON so acceptance tests can compare against the truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .board_detect import BoardSpec, CornerSet
from .cloud import PointCloud
from .errors import BehindCamera
from .geom import CameraModel, Pose, Rotation, project
from .imaging import Image
from .lidar_imu import StampedPose
from .online import AngularRateTrack, RadarDetection, rates_from_poses

IMU_RATE = 100.0
LIDAR_RATE = 10.0
CAMERA_RATE = 10.0
RADAR_RATE = 20.0

CLASS_GROUND, CLASS_LANE, CLASS_POLE, CLASS_WALL, CLASS_BOARD = range(5)
CLASS_INTENSITY = {CLASS_GROUND: 30.0, CLASS_LANE: 200.0, CLASS_POLE: 120.0,
                   CLASS_WALL: 40.0, CLASS_BOARD: 200.0}


@dataclass(frozen=True)
class Patch:
    """Rectangular surface patch: p0 + a*u + b*v, a,b in [0,1]; u _|_ v.
    Optional circular holes given in (a*|u|, b*|v|) meters from p0."""

    p0: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cls: int = CLASS_WALL
    holes: tuple = ()          # ((s, t, radius) in meters along u, v)

    def __post_init__(self):
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def transformed(self, pose: Pose) -> "Patch":
        return Patch(pose.transform(self.p0), pose.rotation.apply(self.u),
                     pose.rotation.apply(self.v), self.cls, self.holes)


@dataclass(frozen=True)
class SceneSpec:
    """Analytic scene: ground plane at z=ground_z, lane stripes on the
    ground, vertical cylinder poles, and rectangular patches."""

    ground_z: float | None = 0.0
    lanes: tuple = ()          # ((polyline (N,2), width_m), ...)
    poles: tuple = ()          # ((x, y, base_z, height, radius), ...)
    patches: tuple = ()        # (Patch, ...)
    ground_extent: float = 200.0

    def transformed(self, pose: Pose) -> "SceneSpec":
        """Rigidly move the scene; only z-preserving transforms (yaw plus
        translation) keep the analytic ground/pole forms valid."""
        rz = pose.rotation.matrix[:, 2]
        if abs(rz @ [0, 0, 1] - 1.0) > 1e-9 and (self.ground_z is not None
                                                 or self.poles):
            raise ValueError("scene transform must preserve the z axis")
        lanes = []
        for line, width in self.lanes:
            pts3 = np.column_stack([line, np.zeros(len(line))])
            moved = pose.transform(pts3)
            lanes.append((moved[:, :2], width))
        poles = []
        for x, y, z0, h, r in self.poles:
            base = pose.transform([x, y, z0])
            poles.append((base[0], base[1], base[2], h, r))
        gz = None
        if self.ground_z is not None:
            gz = float(pose.transform([0, 0, self.ground_z])[2])
        return SceneSpec(ground_z=gz, lanes=tuple(lanes), poles=tuple(poles),
                         patches=tuple(p.transformed(pose) for p in self.patches),
                         ground_extent=self.ground_extent)


@dataclass(frozen=True)
class LidarBeamModel:
    rings: int = 64
    azimuth_steps: int = 900
    fov_up_deg: float = 15.0
    fov_down_deg: float = -24.0
    max_range: float = 120.0
    min_range: float = 0.5


@dataclass(frozen=True)
class RigSpec:
    """Ground-truth rig: per-sensor poses are sensor-to-vehicle."""

    sensor_poses: dict = field(default_factory=dict)
    camera: CameraModel | None = None
    lidar_beams: LidarBeamModel = field(default_factory=LidarBeamModel)
    radar_yaw: float = 0.0
    rates: dict = field(default_factory=lambda: {
        "imu": IMU_RATE, "lidar": LIDAR_RATE,
        "camera": CAMERA_RATE, "radar": RADAR_RATE})

    def __post_init__(self):
        if any(r <= 0 for r in self.rates.values()):
            raise ValueError("rates must be positive")


def camera_mount(yaw=0.0, pitch=0.0, roll=0.0, t=(0, 0, 0)) -> Pose:
    """Camera-to-vehicle pose: optical axis along vehicle +x when the
    angles are zero (camera x right = -y_vehicle, y down = -z_vehicle)."""
    base = Rotation(np.array([[0.0, 0.0, 1.0],
                              [-1.0, 0.0, 0.0],
                              [0.0, -1.0, 0.0]]))
    return Pose(Rotation.from_euler_zyx(yaw, pitch, roll) @ base,
                np.asarray(t, dtype=float))


# -- ray casting --------------------------------------------------------------------


def _dist_to_polyline(pts2: np.ndarray, line: np.ndarray) -> np.ndarray:
    d = np.full(len(pts2), np.inf)
    for k in range(len(line) - 1):
        a, b = line[k], line[k + 1]
        ab = b - a
        ln2 = float(ab @ ab)
        if ln2 < 1e-18:
            continue
        t = np.clip(((pts2 - a) @ ab) / ln2, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.minimum(d, np.linalg.norm(pts2 - proj, axis=1))
    return d


def raycast(scene: SceneSpec, origins: np.ndarray, dirs: np.ndarray,
            t_min: float = 0.1, t_max: float = 1e4):
    """Nearest hit of each ray with the analytic scene.

    Returns (t, cls) arrays; t = inf where the ray misses."""
    n = len(dirs)
    best_t = np.full(n, np.inf)
    best_c = np.full(n, -1, dtype=int)

    def consider(t, cls_arr):
        valid = (t > t_min) & (t < t_max) & (t < best_t)
        best_t[valid] = t[valid]
        best_c[valid] = cls_arr[valid] if isinstance(cls_arr, np.ndarray) \
            else cls_arr

    if scene.ground_z is not None:
        dz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (scene.ground_z - origins[:, 2]) / dz
            t = np.where((np.abs(dz) > 1e-12) & (t > 0), t, np.inf)
            hit = origins + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
            inside = np.abs(hit[:, :2]).max(axis=1) <= scene.ground_extent
            t = np.where(inside, t, np.inf)
            cls = np.full(n, CLASS_GROUND)
            if scene.lanes:
                on_lane = np.zeros(n, dtype=bool)
                for line, width in scene.lanes:
                    on_lane |= _dist_to_polyline(hit[:, :2],
                                                 np.asarray(line)) <= width / 2
                cls = np.where(on_lane, CLASS_LANE, cls)
        consider(t, cls)

    for x, y, z0, h, r in scene.poles:
        ox = origins[:, 0] - x
        oy = origins[:, 1] - y
        dx, dy = dirs[:, 0], dirs[:, 1]
        a = dx * dx + dy * dy
        b = 2 * (ox * dx + oy * dy)
        c = ox * ox + oy * oy - r * r
        disc = b * b - 4 * a * c
        ok = (disc > 0) & (a > 1e-12)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-b - sq) / (2 * a)
        z_hit = origins[:, 2] + t1 * dirs[:, 2]
        t1 = np.where(ok & (z_hit >= z0) & (z_hit <= z0 + h), t1, np.inf)
        consider(t1, CLASS_POLE)

    for patch in scene.patches:
        nrm = np.cross(patch.u, patch.v)
        nn = np.linalg.norm(nrm)
        nrm = nrm / nn
        denom = dirs @ nrm
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((patch.p0 - origins) @ nrm) / denom
        t = np.where(np.abs(denom) > 1e-12, t, np.inf)
        with np.errstate(invalid="ignore"):
            hit = origins + t[:, None] * dirs - patch.p0
            lu2 = float(patch.u @ patch.u)
            lv2 = float(patch.v @ patch.v)
            a = hit @ patch.u / lu2
            bcoord = hit @ patch.v / lv2
            inside = (a >= 0) & (a <= 1) & (bcoord >= 0) & (bcoord <= 1)
            if patch.holes:
                su = a * math.sqrt(lu2)
                sv = bcoord * math.sqrt(lv2)
                for hs, ht, hr in patch.holes:
                    inside &= (su - hs) ** 2 + (sv - ht) ** 2 > hr * hr
        consider(np.where(inside, t, np.inf), patch.cls)

    return best_t, best_c


def lidar_rays(beams: LidarBeamModel) -> np.ndarray:
    el = np.radians(np.linspace(beams.fov_down_deg, beams.fov_up_deg,
                                beams.rings))
    az = np.linspace(0, 2 * math.pi, beams.azimuth_steps, endpoint=False)
    ee, aa = np.meshgrid(el, az)
    ce = np.cos(ee.ravel())
    return np.column_stack([ce * np.cos(aa.ravel()),
                            ce * np.sin(aa.ravel()),
                            np.sin(ee.ravel())])


def sample_lidar(scene: SceneSpec, pose: Pose, beams: LidarBeamModel
                 = LidarBeamModel(), *, noise_sigma: float = 0.0,
                 seed: int = 0, frame_id: str = "lidar",
                 return_classes: bool = False):
    """Ray-cast LiDAR frame in the sensor frame. Intensity is high on lanes
    and boards, low elsewhere."""
    dirs_s = lidar_rays(beams)
    dirs_w = dirs_s @ pose.rotation.matrix.T
    origins = np.broadcast_to(pose.translation, dirs_w.shape)
    t, cls = raycast(scene, origins, dirs_w,
                     t_min=beams.min_range, t_max=beams.max_range)
    hit = np.isfinite(t)
    t = t[hit]
    cls = cls[hit]
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        t = t + rng.normal(0, noise_sigma, len(t))
    pts = dirs_s[hit] * t[:, None]
    intensity = np.array([CLASS_INTENSITY[c] for c in cls])
    cloud = PointCloud(pts, intensity, frame_id)
    if return_classes:
        return cloud, cls
    return cloud


def render_scene_masks(scene: SceneSpec, cam: CameraModel,
                       cam_pose_world: Pose) -> dict:
    """Per-pixel class masks for 'lane' and 'pole' by ray casting through
    the camera model (ideal segmentation stand-in)."""
    us, vs = np.meshgrid(np.arange(cam.width) + 0.0,
                         np.arange(cam.height) + 0.0)
    xy = np.stack([(us.ravel() - cam.cx) / cam.fx,
                   (vs.ravel() - cam.cy) / cam.fy], axis=-1)
    if cam.has_distortion():
        xy = cam.undistort_normalized(xy)
    dirs_c = np.column_stack([xy, np.ones(len(xy))])
    dirs_w = dirs_c @ cam_pose_world.rotation.matrix.T
    origins = np.broadcast_to(cam_pose_world.translation, dirs_w.shape)
    t, cls = raycast(scene, origins, dirs_w, t_min=0.1)
    cls = np.where(np.isfinite(t), cls, -1).reshape(cam.height, cam.width)
    return {
        "lane": Image(np.where(cls == CLASS_LANE, 255, 0)),
        "pole": Image(np.where(cls == CLASS_POLE, 255, 0)),
    }


# -- board rendering ------------------------------------------------------------------


def _checkerboard_color(spec: BoardSpec, bx, by):
    s = spec.pitch
    a = np.floor(bx / s + (spec.cols + 1) / 2)
    b = np.floor(by / s + (spec.rows + 1) / 2)
    in_squares = (a >= 0) & (a <= spec.cols) & (b >= 0) & (b <= spec.rows)
    dark = np.mod(a + b, 2) == 0
    color = np.where(in_squares & dark, 25.0, 235.0)
    on_board = (np.abs(bx) <= spec.width / 2) & (np.abs(by) <= spec.height / 2)
    return color, on_board


def _circleboard_color(spec: BoardSpec, bx, by):
    s = spec.pitch
    xs = (np.round(bx / s + (spec.cols - 1) / 2)).astype(int)
    ys = (np.round(by / s + (spec.rows - 1) / 2)).astype(int)
    xs = np.clip(xs, 0, spec.cols - 1)
    ys = np.clip(ys, 0, spec.rows - 1)
    cx = (xs - (spec.cols - 1) / 2) * s
    cy = (ys - (spec.rows - 1) / 2) * s
    d = np.hypot(bx - cx, by - cy)
    is_black_col = np.isin(xs, np.asarray(spec.black_cols, dtype=int))
    radius = np.where(is_black_col, spec.black_radius, spec.white_radius)
    inside = d <= radius
    color = np.where(is_black_col, 25.0, 235.0)
    color = np.where(inside, color, 128.0)
    on_board = (np.abs(bx) <= spec.width / 2) & (np.abs(by) <= spec.height / 2)
    return color, on_board


def render_board_image(spec: BoardSpec, cam: CameraModel, pose: Pose, *,
                       supersample: int = 3, background: float = None,
                       occlusions: tuple = ()):
    """Anti-aliased raster of a posed board plus exact projected reference
    points (inner corners or circle centers, row-major).

    `occlusions` are (X, Y, radius) discs in board meters painted with the
    board background (for completion tests)."""
    if pose.translation[2] <= 0:
        raise BehindCamera("board center behind the camera")
    if background is None:
        background = 128.0 if spec.kind == "circle" else 160.0

    ss = supersample
    h, w = cam.height, cam.width
    offs = (np.arange(ss, dtype=np.float32) + 0.5) / ss - 0.5
    ou, ov = np.meshgrid(offs, offs)
    us = (np.arange(w, dtype=np.float32)[None, :, None] + ou.ravel()[None, None, :])
    vs = (np.arange(h, dtype=np.float32)[:, None, None] + ov.ravel()[None, None, :])
    xn = (np.broadcast_to(us, (h, w, ss * ss)).ravel() - cam.cx) / cam.fx
    yn = (np.broadcast_to(vs, (h, w, ss * ss)).ravel() - cam.cy) / cam.fy
    if cam.has_distortion():
        xy = cam.undistort_normalized(np.stack([xn, yn], axis=-1), iters=12)
        xn, yn = xy[..., 0].astype(np.float32), xy[..., 1].astype(np.float32)

    # normalized-coords -> board-plane coords is the inverse of [r1 r2 t]
    r = pose.rotation.matrix
    t = pose.translation
    m = np.linalg.inv(np.column_stack([r[:, 0], r[:, 1], t])).astype(np.float32)
    # homogeneous board coords [X, Y, 1] / lambda; w = 1/ray-depth, so the
    # board is in front of the camera exactly where w > 0
    wgt = m[2, 0] * xn + m[2, 1] * yn + m[2, 2]
    valid = wgt > 1e-12
    wsafe = np.where(valid, wgt, 1.0)
    bx = (m[0, 0] * xn + m[0, 1] * yn + m[0, 2]) / wsafe
    by = (m[1, 0] * xn + m[1, 1] * yn + m[1, 2]) / wsafe

    if spec.kind == "checkerboard":
        color, on_board = _checkerboard_color(spec, bx, by)
        ref = spec.grid_points_3d()
    elif spec.kind == "circle":
        color, on_board = _circleboard_color(spec, bx, by)
        ref = spec.grid_points_3d()
    else:
        raise ValueError("render_board_image supports checkerboard/circle")
    for ox, oy, orad in occlusions:
        occluded = (bx - ox) ** 2 + (by - oy) ** 2 <= orad ** 2
        color = np.where(occluded, background, color)
    color = np.where(valid & on_board, color, background)
    img = color.reshape(h, w, ss * ss).mean(axis=2)

    corners = project(cam, pose.transform(ref))
    cs = CornerSet(points=corners, rows=spec.rows, cols=spec.cols)
    return Image(img), cs


# -- trajectories -----------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryTrack:
    """Sampled C1 vehicle track with body angular rates consistent with the
    pose differences (omega_k = log(R_k^T R_{k+1}) / dt)."""

    poses: list
    rates: AngularRateTrack

    @property
    def stamps(self) -> np.ndarray:
        return np.array([s.stamp for s in self.poses])

    def positions(self) -> np.ndarray:
        return np.array([s.pose.translation for s in self.poses])

    def sensor_track(self, extrinsic: Pose, zero_start: bool = True) -> list:
        """Pose track of a rigidly attached sensor; with zero_start the
        track is expressed in the sensor's own first frame (odometry)."""
        out = [StampedPose(s.stamp, s.pose @ extrinsic) for s in self.poses]
        if zero_start:
            first_inv = out[0].pose.inverse()
            out = [StampedPose(s.stamp, first_inv @ s.pose) for s in out]
        return out


def gen_trajectory(kind: str, duration: float, speed: float = 10 / 3.6, *,
                   rate: float = IMU_RATE, radius: float = 20.0,
                   scale: float = 15.0, bank_gain: float = 0.5,
                   start=(0.0, 0.0, 0.0)) -> TrajectoryTrack:
    """Vehicle trajectory sampled at the IMU rate.

    kinds: 'straight' (east), 'circle' (left turn of given radius),
    'figure_eight' (Gerono lemniscate of half-width `scale`, with a
    speed-proportional body-roll bank so two rotation axes are excited,
    as a real vehicle does in turns)."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * rate)) + 1
    ts = np.arange(n) / rate
    start = np.asarray(start, dtype=float)

    if kind == "straight":
        xy = np.column_stack([speed * ts, np.zeros(n)])
        yaw = np.zeros(n)
        roll = np.zeros(n)
    elif kind == "circle":
        om = speed / radius
        xy = np.column_stack([radius * np.sin(om * ts),
                              radius * (1 - np.cos(om * ts))])
        yaw = om * ts
        roll = np.full(n, bank_gain * speed * om / 9.81)
    elif kind == "figure_eight":
        uu = np.linspace(0, 2 * math.pi, 20001)
        gx = scale * np.sin(uu)
        gy = scale * np.sin(uu) * np.cos(uu)
        seg = np.hypot(np.diff(gx), np.diff(gy))
        arclen = np.concatenate([[0], np.cumsum(seg)])
        lap = arclen[-1]
        s_of_t = speed * ts
        u = np.interp(np.mod(s_of_t, lap), arclen, uu)
        laps = np.floor(s_of_t / lap)
        u = u + laps * 2 * math.pi
        xy = np.column_stack([scale * np.sin(u),
                              scale * np.sin(u) * np.cos(u)])
        dx = scale * np.cos(u)
        dy = scale * np.cos(2 * u)
        yaw = np.unwrap(np.arctan2(dy, dx))
        du = np.gradient(u, ts)
        ddx = -scale * np.sin(u) * du
        ddy = -2 * scale * np.sin(2 * u) * du
        yaw_rate = (dx * ddy - dy * ddx) / (dx * dx + dy * dy)
        roll = bank_gain * speed * yaw_rate / 9.81
    else:
        raise ValueError(f"unknown trajectory kind {kind!r}")

    poses = []
    for k in range(n):
        rot = Rotation.from_euler_zyx(yaw[k], 0.0, roll[k])
        pos = start + np.array([xy[k, 0], xy[k, 1], 0.0])
        poses.append(StampedPose(float(ts[k]), Pose(rot, pos)))
    rates = rates_from_poses(ts, [s.pose.rotation for s in poses])
    return TrajectoryTrack(poses=poses, rates=rates)


# -- radar -------------------------------------------------------------------------------


def simulate_radar(statics, traj: TrajectoryTrack, mount_yaw: float, *,
                   rate: float = RADAR_RATE, noise_sigma: float = 0.0,
                   seed: int = 0, fov_deg: float = 75.0,
                   max_range: float = 100.0, movers=()):
    """Doppler detections of static objects (and optional movers) along the
    trajectory. For statics the emitted stream satisfies
    V_i = V_e * cos(angle_i + mount_yaw) up to the noise.

    Returns (detections, (speed_stamps, speeds))."""
    rng = np.random.default_rng(seed)
    statics = np.asarray(statics, dtype=float).reshape(-1, 2)
    stamps = traj.stamps
    pos = traj.positions()
    vel = np.gradient(pos, stamps, axis=0)
    stride = max(1, int(round((stamps[1] - stamps[0]) ** -1 / rate)))
    detections = []
    speed = np.linalg.norm(vel[:, :2], axis=1)
    for k in range(0, len(stamps), stride):
        t = float(stamps[k])
        ve = float(speed[k])
        yaw = traj.poses[k].pose.rotation.as_euler_zyx()[0]
        heading = math.atan2(vel[k, 1], vel[k, 0]) if ve > 1e-6 else yaw
        objs = [(sx, sy, 0.0, 0.0) for sx, sy in statics]
        for (mx, my), (mvx, mvy) in movers:
            objs.append((mx + mvx * t, my + mvy * t, mvx, mvy))
        for ox, oy, ovx, ovy in objs:
            rel = np.array([ox - pos[k, 0], oy - pos[k, 1]])
            rng_m = float(np.linalg.norm(rel))
            if rng_m < 1.0 or rng_m > max_range:
                continue
            bearing_world = math.atan2(rel[1], rel[0])
            angle = _wrap(bearing_world - yaw - mount_yaw)
            if abs(angle) > math.radians(fov_deg):
                continue
            los = rel / rng_m
            v_i = float((vel[k, :2] - [ovx, ovy]) @ los)
            if noise_sigma > 0:
                v_i += rng.normal(0, noise_sigma)
            detections.append(RadarDetection(v=v_i, angle=angle,
                                             distance=rng_m, stamp=t))
    return detections, (stamps, speed)


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


# -- canned scenes -------------------------------------------------------------------------


def road_scene(length: float = 80.0) -> SceneSpec:
    """Straight road: solid edge lines, a dashed center line, a stop line
    and roadside poles. The dashes and the stop line pin the longitudinal
    direction, which infinite solid stripes alone cannot constrain."""
    lanes = []
    for y in (-1.75, 1.75):
        lanes.append((np.array([[2.0, y], [length, y]]), 0.20))
    x = 3.0
    while x < length:
        lanes.append((np.array([[x, 0.0], [min(x + 3.0, length), 0.0]]), 0.20))
        x += 6.0
    for x in (8.0, 14.0, 21.0):
        lanes.append((np.array([[x, -2.5], [x, 2.5]]), 0.40))
    poles = []
    for x in np.arange(8.0, length, 12.0):
        poles.append((x, -6.0, 0.0, 5.0, 0.15))
        poles.append((x + 6.0, 6.0, 0.0, 5.0, 0.15))
    return SceneSpec(ground_z=0.0, lanes=tuple(lanes), poles=tuple(poles))


def room_scene(half: float = 16.0, wall_h: float = 5.0) -> SceneSpec:
    """Closed yard: flat ground, four walls, a few poles inside."""
    patches = []
    for sgn in (-1.0, 1.0):
        patches.append(Patch([sgn * half, -half, 0], [0, 2 * half, 0],
                             [0, 0, wall_h], CLASS_WALL))
        patches.append(Patch([-half, sgn * half, 0], [2 * half, 0, 0],
                             [0, 0, wall_h], CLASS_WALL))
    poles = ((half * 0.5, half * 0.4, 0.0, 4.0, 0.2),
             (-half * 0.45, -half * 0.55, 0.0, 4.0, 0.2),
             (-half * 0.5, half * 0.6, 0.0, 4.0, 0.2))
    return SceneSpec(ground_z=0.0, poles=poles, patches=tuple(patches))


def urban_scene(seed: int = 0) -> SceneSpec:
    """Blocks of walls and poles around an open ground for LiDAR-to-LiDAR
    registration."""
    rng = np.random.default_rng(seed)
    patches = []
    for _ in range(8):
        cx, cy = rng.uniform(-25, 25, 2)
        if math.hypot(cx, cy) < 6:
            cx += math.copysign(8, cx)
        ln = rng.uniform(6, 14)
        ang = rng.uniform(0, math.pi)
        u = np.array([math.cos(ang), math.sin(ang), 0]) * ln
        patches.append(Patch([cx - u[0] / 2, cy - u[1] / 2, 0.0], u,
                             [0, 0, rng.uniform(3, 7)], CLASS_WALL))
    poles = tuple((float(rng.uniform(-25, 25)), float(rng.uniform(-25, 25)),
                   0.0, float(rng.uniform(3, 6)), 0.15) for _ in range(10))
    return SceneSpec(ground_z=0.0, poles=poles, patches=tuple(patches))


def board_rig_scene(spec: BoardSpec, board_pose_world: Pose) -> SceneSpec:
    """A single board patch (with holes when the spec has them) floating in
    an empty scene, for LiDAR board sampling."""
    r = board_pose_world.rotation.matrix
    origin = board_pose_world.transform(
        [-spec.width / 2, -spec.height / 2, 0.0])
    holes = tuple((hx + spec.width / 2, hy + spec.height / 2, spec.hole_radius)
                  for hx, hy in np.asarray(spec.hole_centers,
                                           dtype=float).reshape(-1, 2)) \
        if spec.hole_centers else ()
    patch = Patch(origin, r[:, 0] * spec.width, r[:, 1] * spec.height,
                  CLASS_BOARD, holes)
    return SceneSpec(ground_z=None, patches=(patch,))
