"""Rigid-body and projective geometry primitives.

Conventions used across the whole toolbox:

* Rotations are 3x3 orthonormal matrices. Euler angles are intrinsic ZYX
  (yaw about z, then pitch about y, then roll about x), in radians unless a
  name says `_deg`. Quaternions are (w, x, y, z).
* A Pose maps points from its source frame into its target frame:
  p_dst = R @ p_src + t.
* The camera frame is x-right, y-down, z-forward; pixels are (u, v) with u
  along image columns.
* Distortion is Brown-Conrady with coefficients (k1, k2, p1, p2, k3).

All types are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AtInfinity, BehindCamera, Degenerate, ZeroAxis

_EPS = 1e-12


def _as_vec3(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {a.shape}")
    return a


class Rotation:
    """3x3 orthonormal rotation matrix with conversion helpers."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"rotation matrix must be 3x3, got {m.shape}")
        err = np.linalg.norm(m.T @ m - np.eye(3))
        if err > 1e-6 or np.linalg.det(m) < 0:
            raise ValueError("matrix is not a proper rotation")
        if err > 1e-12:
            # project to the nearest rotation so downstream invariants hold
            u, _, vt = np.linalg.svd(m)
            m = u @ vt
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("Rotation is immutable")

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def from_quat(cls, q) -> "Rotation":
        w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
        m = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])
        return cls(m)

    def as_quat(self) -> np.ndarray:
        """Quaternion (w, x, y, z), w >= 0."""
        m = self.matrix
        t = np.trace(m)
        if t > 0:
            s = math.sqrt(t + 1.0) * 2
            q = np.array([0.25 * s,
                          (m[2, 1] - m[1, 2]) / s,
                          (m[0, 2] - m[2, 0]) / s,
                          (m[1, 0] - m[0, 1]) / s])
        else:
            i = int(np.argmax(np.diag(m)))
            j, k = (i + 1) % 3, (i + 2) % 3
            s = math.sqrt(max(1.0 + m[i, i] - m[j, j] - m[k, k], 0.0)) * 2
            q = np.empty(4)
            q[0] = (m[k, j] - m[j, k]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (m[j, i] + m[i, j]) / s
            q[1 + k] = (m[k, i] + m[i, k]) / s
        if q[0] < 0:
            q = -q
        return q / np.linalg.norm(q)

    @classmethod
    def from_euler_zyx(cls, yaw: float, pitch: float, roll: float) -> "Rotation":
        cz, sz = math.cos(yaw), math.sin(yaw)
        cy, sy = math.cos(pitch), math.sin(pitch)
        cx, sx = math.cos(roll), math.sin(roll)
        rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        return cls(rz @ ry @ rx)

    def as_euler_zyx(self) -> tuple[float, float, float]:
        """(yaw, pitch, roll) in radians; pitch in [-pi/2, pi/2]."""
        m = self.matrix
        pitch = math.asin(max(-1.0, min(1.0, -m[2, 0])))
        if abs(m[2, 0]) < 1.0 - 1e-12:
            yaw = math.atan2(m[1, 0], m[0, 0])
            roll = math.atan2(m[2, 1], m[2, 2])
        else:
            # gimbal lock: yaw and roll degenerate; put everything in yaw
            yaw = math.atan2(-m[0, 1], m[1, 1])
            roll = 0.0
        return yaw, pitch, roll

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        return rodrigues(axis, angle)

    def as_axis_angle(self) -> tuple[np.ndarray, float]:
        """Log map: (unit axis, angle in [0, pi]). Axis is z for angle ~ 0."""
        q = self.as_quat()
        w = max(-1.0, min(1.0, q[0]))
        angle = 2.0 * math.acos(w)
        s = math.sqrt(max(1.0 - w * w, 0.0))
        if s < 1e-12:
            return np.array([0.0, 0.0, 1.0]), 0.0
        return q[1:] / s, angle

    def as_rotvec(self) -> np.ndarray:
        axis, angle = self.as_axis_angle()
        return axis * angle

    @classmethod
    def from_rotvec(cls, v) -> "Rotation":
        v = _as_vec3(v)
        angle = float(np.linalg.norm(v))
        if angle < 1e-14:
            return cls.identity()
        return rodrigues(v / angle, angle)

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T)

    def apply(self, p) -> np.ndarray:
        a = np.asarray(p, dtype=float)
        return a @ self.matrix.T

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix)

    def angle_to(self, other: "Rotation") -> float:
        """Geodesic distance in radians."""
        return (self.inverse() @ other).as_axis_angle()[1]

    def __repr__(self):
        y, p, r = self.as_euler_zyx()
        return (f"Rotation(zyx_deg=[{math.degrees(y):.3f}, "
                f"{math.degrees(p):.3f}, {math.degrees(r):.3f}])")


def rodrigues(axis, angle: float) -> Rotation:
    """Rotation by `angle` (rad) about a unit `axis`."""
    a = _as_vec3(axis)
    n = np.linalg.norm(a)
    if n < 1e-9:
        raise ZeroAxis(f"axis norm {n:g} too small")
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"axis must be unit length, |axis| = {n:g}")
    a = a / n
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    m = np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * (k @ k)
    return Rotation(m)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p_dst = rotation @ p_src + translation."""

    rotation: Rotation
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = _as_vec3(self.translation).copy()
        t.flags.writeable = False
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(Rotation(m[:3, :3]), m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.matrix
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "Pose") -> "Pose":
        """self o other: apply `other` first, then `self`."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation.apply(other.translation) + self.translation)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        rinv = self.rotation.inverse()
        return Pose(rinv, -rinv.apply(self.translation))

    def transform(self, p) -> np.ndarray:
        """Apply to one 3-vector or an (N, 3) array."""
        a = np.asarray(p, dtype=float)
        return a @ self.rotation.matrix.T + self.translation

    def rotation_angle_to(self, other: "Pose") -> float:
        return self.rotation.angle_to(other.rotation)

    def translation_distance_to(self, other: "Pose") -> float:
        return float(np.linalg.norm(self.translation - other.translation))


def transform(pose: Pose, p) -> np.ndarray:
    """R @ p + t."""
    return pose.transform(p)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus Brown-Conrady distortion."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    k3: float = 0.0
    width: int = 1920
    height: int = 1080

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image bounds")

    @property
    def k_matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    @property
    def distortion(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.p1, self.p2, self.k3])

    def has_distortion(self) -> bool:
        return bool(np.any(self.distortion != 0.0))

    def distort_normalized(self, xy: np.ndarray) -> np.ndarray:
        """Apply distortion to normalized image coordinates, shape (..., 2)."""
        x = xy[..., 0]
        y = xy[..., 1]
        r2 = x * x + y * y
        radial = 1 + self.k1 * r2 + self.k2 * r2 ** 2 + self.k3 * r2 ** 3
        xd = x * radial + 2 * self.p1 * x * y + self.p2 * (r2 + 2 * x * x)
        yd = y * radial + self.p1 * (r2 + 2 * y * y) + 2 * self.p2 * x * y
        return np.stack([xd, yd], axis=-1)

    def undistort_normalized(self, xy: np.ndarray, iters: int = 20) -> np.ndarray:
        """Invert the distortion map by fixed-point iteration."""
        xy = np.asarray(xy, dtype=float)
        und = xy.copy()
        for _ in range(iters):
            d = self.distort_normalized(und)
            und = und + (xy - d)
        return und

    def replace(self, **kw) -> "CameraModel":
        from dataclasses import replace as _replace
        return _replace(self, **kw)


def project(cam: CameraModel, p_cam) -> np.ndarray:
    """Project camera-frame point(s) to pixels (u, v); raises BehindCamera."""
    p = np.asarray(p_cam, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    z = p[:, 2]
    if np.any(z <= 1e-9):
        raise BehindCamera(f"point depth {z.min():g} <= 1e-9")
    xy = p[:, :2] / z[:, None]
    d = cam.distort_normalized(xy)
    uv = np.empty_like(d)
    uv[:, 0] = cam.fx * d[:, 0] + cam.cx
    uv[:, 1] = cam.fy * d[:, 1] + cam.cy
    return uv[0] if single else uv


def project_valid(cam: CameraModel, p_cam) -> tuple[np.ndarray, np.ndarray]:
    """Like project() for (N, 3) input, but returns (uv, in_front_mask)
    instead of raising, with uv rows undefined where the mask is False."""
    p = np.atleast_2d(np.asarray(p_cam, dtype=float))
    z = p[:, 2]
    ok = z > 1e-9
    zsafe = np.where(ok, z, 1.0)
    xy = p[:, :2] / zsafe[:, None]
    d = cam.distort_normalized(xy)
    uv = np.empty_like(d)
    uv[:, 0] = cam.fx * d[:, 0] + cam.cx
    uv[:, 1] = cam.fy * d[:, 1] + cam.cy
    return uv, ok


def unproject(cam: CameraModel, uv, depth: float) -> np.ndarray:
    """Camera-frame point at given z-depth whose projection is (u, v)."""
    uv = np.asarray(uv, dtype=float)
    xy = np.stack([(uv[..., 0] - cam.cx) / cam.fx,
                   (uv[..., 1] - cam.cy) / cam.fy], axis=-1)
    und = cam.undistort_normalized(xy) if cam.has_distortion() else xy
    return np.concatenate([und * depth, np.full(und.shape[:-1] + (1,), depth)], axis=-1)


class Homography:
    """3x3 invertible projective map, normalized so h33 = 1 when feasible."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise Degenerate("homography is singular")
        if abs(m[2, 2]) > 1e-9:
            m = m / m[2, 2]
        else:
            m = m / np.linalg.norm(m)
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("Homography is immutable")

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def apply(self, p) -> np.ndarray:
        return apply_homography(self, p)


def apply_homography(h: Homography, p) -> np.ndarray:
    """Map 2D point(s) through H; raises AtInfinity when w ~ 0."""
    a = np.asarray(p, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    ph = np.column_stack([a, np.ones(len(a))]) @ h.matrix.T
    w = ph[:, 2]
    if np.any(np.abs(w) < 1e-12):
        raise AtInfinity("point maps to infinity")
    out = ph[:, :2] / w[:, None]
    return out[0] if single else out


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    s = math.sqrt(2) / max(d, _EPS)
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]])


def fit_homography_dlt(src, dst) -> Homography:
    """Least-squares homography from >= 4 correspondences (DLT with
    Hartley normalization). src/dst: (N, 2) arrays."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src/dst must be matching (N, 2) arrays")
    n = len(src)
    if n < 4:
        raise Degenerate(f"need >= 4 correspondences, got {n}")
    ts, td = _hartley_normalization(src), _hartley_normalization(dst)
    sh = np.column_stack([src, np.ones(n)]) @ ts.T
    dh = np.column_stack([dst, np.ones(n)]) @ td.T
    a = np.zeros((2 * n, 9))
    a[0::2, 0:3] = sh
    a[0::2, 6:9] = -dh[:, [0]] * sh
    a[1::2, 3:6] = sh
    a[1::2, 6:9] = -dh[:, [1]] * sh
    _, s, vt = np.linalg.svd(a)
    if s[7] < 1e-9 * max(s[0], _EPS):
        raise Degenerate("design matrix rank < 8 (degenerate correspondences)")
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(td) @ hn @ ts
    return Homography(h)


def planar_pose_from_homography(cam: CameraModel, board_h: Homography) -> Pose:
    """Board-to-camera pose from the homography mapping board-plane (X, Y)
    meters to pixels. The recovered rotation is orthonormalized and the
    board is placed in front of the camera (t_z > 0)."""
    h = np.linalg.inv(cam.k_matrix) @ board_h.matrix
    h1, h2, h3 = h[:, 0], h[:, 1], h[:, 2]
    n1, n2 = np.linalg.norm(h1), np.linalg.norm(h2)
    if n1 < _EPS or n2 < _EPS:
        raise Degenerate("homography column rank loss")
    lam = 2.0 / (n1 + n2)
    r1, r2 = h1 * lam, h2 * lam
    t = h3 * lam
    if t[2] < 0:
        r1, r2, t = -r1, -r2, -t
    r3 = np.cross(r1, r2)
    q = np.column_stack([r1, r2, r3])
    u, s, vt = np.linalg.svd(q)
    if s[2] < 1e-9:
        raise Degenerate("rotation estimate rank-deficient")
    r = u @ np.diag([1.0, 1.0, np.linalg.det(u @ vt)]) @ vt
    return Pose(Rotation(r), t)
