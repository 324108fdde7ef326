"""Point-cloud container, PCD IO, plane RANSAC and octree occupancy volume."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyCloud, NoPlane, ParseError, TooFewPoints
from .geom import Pose

# default orientation gate for ground extraction: 30 deg cone around +z
GROUND_CONSTRAINT = (np.array([0.0, 0.0, 1.0]), math.radians(30.0))


class PointCloud:
    """N x (x, y, z, intensity) samples in a named sensor frame."""

    __slots__ = ("xyz", "intensity", "frame_id", "_tree")

    def __init__(self, xyz, intensity=None, frame_id: str = ""):
        xyz = np.asarray(xyz, dtype=float).reshape(-1, 3).copy()
        if not np.all(np.isfinite(xyz)):
            raise ValueError("cloud contains non-finite coordinates")
        if intensity is None:
            intensity = np.zeros(len(xyz))
        intensity = np.asarray(intensity, dtype=float).reshape(-1).copy()
        if len(intensity) != len(xyz):
            raise ValueError("intensity length mismatch")
        if len(intensity) and (intensity.min() < 0 or intensity.max() > 255):
            raise ValueError("intensity outside [0, 255]")
        xyz.flags.writeable = False
        intensity.flags.writeable = False
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "frame_id", frame_id)
        object.__setattr__(self, "_tree", None)

    def __setattr__(self, name, value):
        if name == "_tree":
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("PointCloud is immutable")

    def __len__(self):
        return len(self.xyz)

    def tree(self) -> cKDTree:
        if self._tree is None:
            if len(self) == 0:
                raise EmptyCloud("cannot index an empty cloud")
            self._tree = cKDTree(self.xyz)
        return self._tree

    def transformed(self, pose: Pose, frame_id: str | None = None) -> "PointCloud":
        return PointCloud(pose.transform(self.xyz), self.intensity,
                          frame_id if frame_id is not None else self.frame_id)

    def select(self, mask_or_idx) -> "PointCloud":
        return PointCloud(self.xyz[mask_or_idx], self.intensity[mask_or_idx],
                          self.frame_id)

    def merged_with(self, other: "PointCloud") -> "PointCloud":
        return PointCloud(np.vstack([self.xyz, other.xyz]),
                          np.concatenate([self.intensity, other.intensity]),
                          self.frame_id)


def nearest(cloud: PointCloud, query) -> tuple[int, float]:
    """Exact nearest neighbor (index, distance) via a KD-tree."""
    if len(cloud) == 0:
        raise EmptyCloud("nearest() on empty cloud")
    d, i = cloud.tree().query(np.asarray(query, dtype=float))
    return int(i), float(d)


# -- PCD (ASCII subset) -------------------------------------------------------

_PCD_FIELDS = ["x", "y", "z", "intensity"]


def save_cloud(cloud: PointCloud, path) -> None:
    n = len(cloud)
    lines = [
        "# .PCD v0.7 - Point Cloud Data file format",
        "VERSION 0.7",
        "FIELDS x y z intensity",
        "SIZE 8 8 8 8",
        "TYPE F F F F",
        "COUNT 1 1 1 1",
        f"WIDTH {n}",
        "HEIGHT 1",
        "VIEWPOINT 0 0 0 1 0 0 0",
        f"POINTS {n}",
        "DATA ascii",
    ]
    rows = np.column_stack([cloud.xyz, cloud.intensity])
    body = "\n".join(" ".join(repr(float(v)) for v in row) for row in rows)
    text = "\n".join(lines)
    if body:
        text += "\n" + body
    with open(path, "w") as f:
        f.write(text + "\n")


def load_cloud(path, frame_id: str = "") -> PointCloud:
    with open(path, "r") as f:
        raw = f.read().splitlines()
    header: dict[str, list[str]] = {}
    data_start = None
    for ln, line in enumerate(raw):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        key = parts[0].upper()
        header[key] = parts[1:]
        if key == "DATA":
            if parts[1:] != ["ascii"]:
                raise ParseError(f"line {ln + 1}: only DATA ascii is supported")
            data_start = ln + 1
            break
    if data_start is None:
        raise ParseError("missing DATA line")
    if header.get("FIELDS") != _PCD_FIELDS:
        raise ParseError(f"FIELDS must be '{' '.join(_PCD_FIELDS)}', "
                         f"got {header.get('FIELDS')}")
    try:
        n = int(header["POINTS"][0])
    except (KeyError, IndexError, ValueError):
        raise ParseError("missing or malformed POINTS line") from None
    pts = np.empty((n, 4))
    row = 0
    for ln in range(data_start, len(raw)):
        stripped = raw[ln].strip()
        if not stripped:
            continue
        vals = stripped.split()
        if len(vals) != 4:
            raise ParseError(f"line {ln + 1}: expected 4 values, got {len(vals)}")
        if row >= n:
            raise ParseError(f"line {ln + 1}: more rows than POINTS={n}")
        try:
            pts[row] = [float(v) for v in vals]
        except ValueError:
            raise ParseError(f"line {ln + 1}: non-numeric value") from None
        row += 1
    if row != n:
        raise ParseError(f"expected {n} data rows, found {row}")
    return PointCloud(pts[:, :3], pts[:, 3], frame_id)


def save_cloud_csv(cloud: PointCloud, path) -> None:
    rows = np.column_stack([cloud.xyz, cloud.intensity])
    with open(path, "w") as f:
        f.write("x,y,z,intensity\n")
        for row in rows:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


# -- RANSAC plane -------------------------------------------------------------

@dataclass(frozen=True)
class GroundPlane:
    """Plane a*x + b*y + c*z + d = 0 with unit normal (a, b, c)."""

    a: float
    b: float
    c: float
    d: float
    inlier_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def distances(self, xyz) -> np.ndarray:
        xyz = np.asarray(xyz, dtype=float)
        return xyz @ self.normal + self.d

    def flipped(self) -> "GroundPlane":
        return GroundPlane(-self.a, -self.b, -self.c, -self.d, self.inlier_indices)


def _plane_from_points(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    nn = np.linalg.norm(n)
    if nn < 1e-12:
        return None
    n = n / nn
    return n, -float(n @ p0)


def _lsq_plane(xyz: np.ndarray):
    c = xyz.mean(axis=0)
    q = xyz - c
    cov = q.T @ q
    w, v = np.linalg.eigh(cov)
    n = v[:, 0]
    return n, -float(n @ c)


def ransac_plane(cloud: PointCloud, eps: float, max_iters: int = 200,
                 constraint=None, seed: int = 0) -> GroundPlane:
    """Largest plane by inlier count within thickness `eps`, refit by least
    squares on its inliers.

    `constraint` is an optional (axis, max_angle_rad) cone; candidate normals
    are flipped toward the axis and rejected when outside the cone.
    """
    xyz = cloud.xyz
    n_pts = len(xyz)
    if n_pts < 3:
        raise TooFewPoints(f"RANSAC plane needs >= 3 points, got {n_pts}")
    rng = np.random.default_rng(seed)
    best_count = -1
    best = None
    for _ in range(max_iters):
        idx = rng.choice(n_pts, 3, replace=False)
        cand = _plane_from_points(*xyz[idx])
        if cand is None:
            continue
        n, d = cand
        if constraint is not None:
            axis, max_ang = constraint
            if n @ axis < 0:
                n, d = -n, -d
            if n @ axis < math.cos(max_ang):
                continue
        count = int(np.count_nonzero(np.abs(xyz @ n + d) <= eps))
        if count > best_count:
            best_count = count
            best = (n, d)
    if best is None or best_count < max(3, 0.1 * n_pts):
        raise NoPlane(f"best inlier fraction {max(best_count, 0) / n_pts:.2%} < 10%")
    n, d = best
    # two refit rounds: least squares on inliers, then re-select inliers
    for _ in range(2):
        inliers = np.abs(xyz @ n + d) <= eps
        n, d = _lsq_plane(xyz[inliers])
    if constraint is not None and n @ constraint[0] < 0:
        n, d = -n, -d
    inlier_idx = np.nonzero(np.abs(xyz @ n + d) <= eps)[0]
    return GroundPlane(float(n[0]), float(n[1]), float(n[2]), float(d), inlier_idx)


# -- octree occupancy volume ---------------------------------------------------

@dataclass(frozen=True)
class Octree:
    """Occupancy summary of the cube hierarchy at a fixed cut depth.

    A leaf is occupied iff it contains at least one point; because every cut
    splits a cube into 8 equal children, the occupied leaves at depth D are
    exactly the distinct point cells of the 2^D-per-side lattice.
    """

    center: np.ndarray
    side: float
    depth: int
    occupied_leaves: int

    @property
    def leaf_side(self) -> float:
        return self.side / (2 ** self.depth)

    @property
    def volume(self) -> float:
        return self.occupied_leaves * self.leaf_side ** 3

    @classmethod
    def build(cls, cloud: PointCloud, min_side: float, root=None) -> "Octree":
        if len(cloud) == 0:
            raise EmptyCloud("octree of empty cloud")
        if min_side <= 0:
            raise ValueError("min_side must be positive")
        if root is None:
            lo = cloud.xyz.min(axis=0)
            hi = cloud.xyz.max(axis=0)
            center = (lo + hi) / 2
            side = float((hi - lo).max()) * 1.01
            side = max(side, min_side)
        else:
            center, side = np.asarray(root[0], dtype=float), float(root[1])
        depth = 0
        while side / (2 ** depth) > min_side + 1e-12:
            depth += 1
        leaf = side / (2 ** depth)
        corner = center - side / 2
        cells = np.floor((cloud.xyz - corner) / leaf).astype(np.int64)
        np.clip(cells, 0, 2 ** depth - 1, out=cells)
        occupied = len(np.unique(cells, axis=0))
        return cls(center=center, side=side, depth=depth, occupied_leaves=occupied)


def octree_volume(cloud: PointCloud, min_side: float = 0.1, root=None) -> float:
    """Total volume of occupied leaves at the first depth where the leaf
    side is <= min_side."""
    return Octree.build(cloud, min_side, root=root).volume
