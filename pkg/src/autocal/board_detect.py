"""Calibration-target detection for factory rigs.

Three detectors:

* checkerboard inner corners from a camera image,
* circle-board centers from a camera image (two columns of black circles
  anchor the pattern, remaining centers are predicted and completed),
* round-hole centers from a LiDAR cloud (mask search minimizing the number
  of returns inside the holes).

All image detectors are built on the OpenCV-free `imaging` primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import imaging as im
from .cloud import PointCloud, ransac_plane
from .errors import AmbiguousPattern, NoBoard, NoHoles, NoPlane, PartialBoard
from .geom import Pose

# quad filters for checkerboard candidates (CLI-overridable)
QUAD_AREA_MIN = 100.0
QUAD_AREA_FRAC_MAX = 0.25
SIDE_RATIO_RANGE = (0.7, 1.4)
RIGHT_ANGLE_TOL_DEG = 15.0
ROW_SLOPE_TOL_DEG = 5.0


@dataclass(frozen=True)
class BoardSpec:
    """Physical description of a calibration target.

    kind: 'checkerboard' (rows x cols inner corners, square side `pitch`),
    'circle' (rows x cols circle grid, black circles in `black_cols`),
    'round_hole' (holes at `hole_centers` in the board plane).
    Lengths are meters; the board frame has x along columns, y along rows,
    origin at the board center, z out of the board face.
    """

    kind: str
    rows: int = 0
    cols: int = 0
    pitch: float = 0.0
    black_radius: float = 0.0
    white_radius: float = 0.0
    black_cols: tuple = ()
    hole_radius: float = 0.0
    hole_centers: tuple = ()
    width: float = 0.0
    height: float = 0.0

    def __post_init__(self):
        if self.kind not in ("checkerboard", "circle", "round_hole"):
            raise ValueError(f"unknown board kind {self.kind!r}")
        if self.kind != "round_hole" and (self.rows < 2 or self.cols < 2):
            raise ValueError("grid must be at least 2x2")
        if self.kind != "round_hole" and self.pitch <= 0:
            raise ValueError("pitch must be positive")
        if self.width <= 0 or self.height <= 0:
            w, h = self._default_extents()
            object.__setattr__(self, "width", w)
            object.__setattr__(self, "height", h)

    def _default_extents(self):
        if self.kind == "checkerboard":
            return (self.cols + 3) * self.pitch, (self.rows + 3) * self.pitch
        if self.kind == "circle":
            return (self.cols + 1) * self.pitch, (self.rows + 1) * self.pitch
        return 1.2, 0.9

    def grid_points(self) -> np.ndarray:
        """Board-frame (X, Y) of the rows x cols lattice, row-major."""
        xs = (np.arange(self.cols) - (self.cols - 1) / 2) * self.pitch
        ys = (np.arange(self.rows) - (self.rows - 1) / 2) * self.pitch
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def grid_points_3d(self) -> np.ndarray:
        g = self.grid_points()
        return np.column_stack([g, np.zeros(len(g))])

    def hole_centers_3d(self) -> np.ndarray:
        h = np.asarray(self.hole_centers, dtype=float).reshape(-1, 2)
        return np.column_stack([h, np.zeros(len(h))])


@dataclass(frozen=True)
class CornerSet:
    """Ordered detection result; row-major board indexing."""

    points: np.ndarray            # (N, 2) px or (N, 3) m
    rows: int
    cols: int
    predicted: np.ndarray = field(default=None)
    score: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if self.predicted is None:
            object.__setattr__(self, "predicted", np.zeros(len(pts), dtype=bool))
        if self.score is None:
            object.__setattr__(self, "score", np.ones(len(pts)))

    def __len__(self):
        return len(self.points)


# -- checkerboard ---------------------------------------------------------------


def _polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _douglas_peucker(pts: np.ndarray, eps: float) -> np.ndarray:
    """Iterative DP simplification of an open polyline."""
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        seg = pts[j] - pts[i]
        ln = np.linalg.norm(seg)
        mid = pts[i + 1:j]
        if ln < 1e-12:
            d = np.linalg.norm(mid - pts[i], axis=1)
        else:
            u = seg / ln
            rel = mid - pts[i]
            d = np.abs(u[0] * rel[:, 1] - u[1] * rel[:, 0])
        k = int(np.argmax(d))
        if d[k] > eps:
            keep[i + 1 + k] = True
            stack.append((i, i + 1 + k))
            stack.append((i + 1 + k, j))
    return pts[keep]


def _approx_quad(contour: np.ndarray):
    """Fit a convex quadrilateral to a closed contour, or None."""
    perim = np.linalg.norm(np.diff(np.vstack([contour, contour[:1]]), axis=0),
                           axis=1).sum()
    # anchor the polyline at the two farthest-apart points
    far = contour[int(np.argmax(np.linalg.norm(contour - contour[0], axis=1)))]
    start = int(np.argmax(np.linalg.norm(contour - far, axis=1)))
    rolled = np.roll(contour, -start, axis=0)
    closed = np.vstack([rolled, rolled[:1]])
    for frac in (0.02, 0.04, 0.06, 0.08, 0.10):
        approx = _douglas_peucker(closed, frac * perim)[:-1]
        if len(approx) == 4:
            return approx
        if len(approx) < 4:
            return None
    return None


def _quad_filters(quad: np.ndarray, img_area: float) -> bool:
    area = _polygon_area(quad)
    if not (QUAD_AREA_MIN <= area <= QUAD_AREA_FRAC_MAX * img_area):
        return False
    sides = np.linalg.norm(np.roll(quad, -1, axis=0) - quad, axis=1)
    if sides.min() < 1e-9:
        return False
    if sides.max() / sides.min() > SIDE_RATIO_RANGE[1] / SIDE_RATIO_RANGE[0]:
        return False
    # interior angles near 90 deg
    for i in range(4):
        a = quad[(i - 1) % 4] - quad[i]
        b = quad[(i + 1) % 4] - quad[i]
        cosang = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
        ang = math.degrees(math.acos(np.clip(cosang, -1, 1)))
        if abs(ang - 90.0) > 2 * RIGHT_ANGLE_TOL_DEG:
            return False
    return True


def _cluster_points(pts: np.ndarray, radius: float):
    """Greedy clustering; returns (means, member counts)."""
    used = np.zeros(len(pts), dtype=bool)
    means, counts = [], []
    for i in range(len(pts)):
        if used[i]:
            continue
        d = np.linalg.norm(pts - pts[i], axis=1)
        members = (d <= radius) & ~used
        used |= members
        means.append(pts[members].mean(axis=0))
        counts.append(int(members.sum()))
    return np.array(means), np.array(counts)


def _saddle_refine(gray: np.ndarray, pt: np.ndarray, half: int = 3) -> np.ndarray:
    """Sub-pixel corner via the stationary point of a local quadratic fit."""
    h, w = gray.shape
    x0, y0 = int(round(pt[0])), int(round(pt[1]))
    if not (half <= x0 < w - half and half <= y0 < h - half):
        return pt
    ys, xs = np.mgrid[-half:half + 1, -half:half + 1]
    patch = gray[y0 - half:y0 + half + 1, x0 - half:x0 + half + 1].astype(float)
    a = np.column_stack([xs.ravel() ** 2, ys.ravel() ** 2,
                         (xs * ys).ravel(), xs.ravel(), ys.ravel(),
                         np.ones(xs.size)])
    coef, *_ = np.linalg.lstsq(a, patch.ravel(), rcond=None)
    ca, cb, cc, cd, ce, _ = coef
    det = 4 * ca * cb - cc * cc
    if abs(det) < 1e-12:
        return pt
    dx = (-2 * cb * cd + cc * ce) / det
    dy = (-2 * ca * ce + cc * cd) / det
    if math.hypot(dx, dy) > 2.0:
        return pt
    return np.array([x0 + dx, y0 + dy])


def _lattice_angle(quads) -> float:
    """Dominant lattice direction from quad edges, folded mod 90 deg and
    canonicalized into (-45, 45]."""
    angs = []
    for q in quads:
        e = np.roll(q, -1, axis=0) - q
        angs.extend(np.arctan2(e[:, 1], e[:, 0]))
    # fold into [0, 90) and take the circular mean
    folded = np.mod(np.asarray(angs), math.pi / 2)
    mean = math.atan2(np.sin(4 * folded).mean(), np.cos(4 * folded).mean()) / 4
    if mean > math.pi / 4:
        mean -= math.pi / 2
    return mean


def _order_grid(corners: np.ndarray, theta: float, pitch_px: float):
    """Sort corners into a row-major lattice in the de-rotated frame.
    Returns (ordered indices as 2D list, n_rows, n_cols) or None."""
    c, s = math.cos(-theta), math.sin(-theta)
    rot = np.array([[c, -s], [s, c]])
    rpts = corners @ rot.T
    order = np.argsort(rpts[:, 1])
    rows: list[list[int]] = [[int(order[0])]]
    for idx in order[1:]:
        if rpts[idx, 1] - rpts[rows[-1][-1], 1] > 0.5 * pitch_px:
            rows.append([int(idx)])
        else:
            rows[-1].append(int(idx))
    ncols = len(rows[0])
    if any(len(r) != ncols for r in rows):
        return None
    for r in rows:
        r.sort(key=lambda i: rpts[i, 0])
    return rows, len(rows), ncols


def _structural_checks(grid_pts: np.ndarray, nrows: int, ncols: int) -> bool:
    """Equal-area right-isosceles triangles over 2x2 cells plus row/column
    slope consistency."""
    g = grid_pts.reshape(nrows, ncols, 2)
    areas = []
    for i in range(nrows - 1):
        for j in range(ncols - 1):
            p, q, r = g[i, j], g[i, j + 1], g[i + 1, j]
            a, b = q - p, r - p
            areas.append(0.5 * abs(a[0] * b[1] - a[1] * b[0]))
            la, lb = np.linalg.norm(a), np.linalg.norm(b)
            if min(la, lb) < 1e-9 or max(la, lb) / min(la, lb) > 1.4:
                return False
            ang = math.degrees(math.acos(np.clip(a @ b / (la * lb), -1, 1)))
            if abs(ang - 90.0) > RIGHT_ANGLE_TOL_DEG:
                return False
    areas = np.asarray(areas)
    med = np.median(areas)
    if med <= 0 or np.abs(areas - med).max() > 0.35 * med:
        return False
    # slope consistency along rows and columns
    for lines in (g, np.transpose(g, (1, 0, 2))):
        for line in lines:
            d = line[-1] - line[0]
            base = math.atan2(d[1], d[0])
            seg = np.diff(line, axis=0)
            angs = np.arctan2(seg[:, 1], seg[:, 0])
            dev = np.degrees(np.abs(np.angle(np.exp(1j * (angs - base)))))
            if dev.max() > ROW_SLOPE_TOL_DEG:
                return False
    return True


def detect_checkerboard(img: im.Image, spec: BoardSpec) -> CornerSet:
    """Inner-corner detection: binarize, separate black squares, quad-fit,
    cluster shared corners, saddle-refine, order into a row-major grid."""
    gray = im.to_gray(img)
    g = gray.data
    h, w = g.shape
    window = max(11, 2 * (min(h, w) // 16) + 1)
    binary = im.adaptive_threshold(gray, window=window, offset=10).data.copy()
    binary[:2, :] = 255
    binary[-2:, :] = 255
    binary[:, :2] = 255
    binary[:, -2:] = 255
    separated = im.dilate(im.Image(binary), 1)
    black = im.Image(255 - separated.data)
    contours = im.trace_contours(black, min_area=QUAD_AREA_MIN)
    quads = []
    for c in contours:
        quad = _approx_quad(c.points)
        if quad is None or not _quad_filters(quad, float(h * w)):
            continue
        if abs(_polygon_area(quad) - c.area) > 0.35 * c.area:
            continue
        quads.append(quad)
    if len(quads) < 2:
        raise NoBoard("no checkerboard squares found")

    sides = np.concatenate([np.linalg.norm(np.roll(q, -1, axis=0) - q, axis=1)
                            for q in quads])
    side_med = float(np.median(sides))
    all_corners = np.vstack(quads)
    means, counts = _cluster_points(all_corners, radius=max(6.0, 0.3 * side_med))
    inner = means[counts >= 2]
    expected = spec.rows * spec.cols
    if len(inner) == 0:
        raise NoBoard("no shared square corners")

    refined = np.array([_saddle_refine(g.astype(float), p) for p in inner])
    theta = _lattice_angle(quads)
    ordered = _order_grid(refined, theta, pitch_px=side_med)
    if ordered is None:
        raise PartialBoard(len(refined))
    rows, nr, nc = ordered
    if (nr, nc) == (spec.cols, spec.rows) and nr != nc:
        # transposed reading of the lattice; re-split along the other axis
        ordered = _order_grid(refined, theta + math.pi / 2, pitch_px=side_med)
        if ordered is None:
            raise PartialBoard(len(refined))
        rows, nr, nc = ordered
    if (nr, nc) != (spec.rows, spec.cols):
        raise PartialBoard(nr * nc)
    idx = [i for r in rows for i in r]
    pts = refined[idx]
    if not _structural_checks(pts, nr, nc):
        raise NoBoard("corner lattice failed structural validation")
    return CornerSet(points=pts, rows=nr, cols=nc)


# -- circle board -----------------------------------------------------------------


def _weighted_centroid(gray: np.ndarray, comp_mask: np.ndarray, dark: bool):
    ys, xs = np.nonzero(comp_mask)
    v = gray[ys, xs].astype(float)
    w = np.maximum(0.0, (255.0 - v) if dark else v)
    if w.sum() < 1e-9:
        return np.array([xs.mean(), ys.mean()])
    return np.array([(xs * w).sum() / w.sum(), (ys * w).sum() / w.sum()])


def _find_circles(gray: np.ndarray, mask: np.ndarray, dark: bool,
                  min_area: float = 30.0):
    """Circle candidates as (center, radius) from one binary polarity."""
    labels, n = im.label_components(mask)
    out = []
    for lab in range(1, n + 1):
        comp = labels == lab
        area = float(comp.sum())
        if area < min_area:
            continue
        ys, xs = np.nonzero(comp)
        if xs.min() == 0 or ys.min() == 0 or xs.max() == mask.shape[1] - 1 \
                or ys.max() == mask.shape[0] - 1:
            continue
        cen = np.array([xs.mean(), ys.mean()])
        boundary = comp & ~(np.roll(comp, 1, 0) & np.roll(comp, -1, 0)
                            & np.roll(comp, 1, 1) & np.roll(comp, -1, 1))
        bys, bxs = np.nonzero(boundary)
        r = np.hypot(bxs - cen[0], bys - cen[1])
        # contour-to-center distance spread test
        if r.max() - r.min() > max(2.0, 0.3 * r.mean()):
            continue
        out.append((_weighted_centroid(gray, comp, dark), float(r.mean())))
    return out


def _ransac_lines(points: np.ndarray, tol: float, min_inliers: int,
                  seed: int = 0, max_lines: int = 6):
    """Extract up to max_lines 2D lines by sequential RANSAC."""
    rng = np.random.default_rng(seed)
    remaining = np.arange(len(points))
    lines = []
    while len(remaining) >= min_inliers and len(lines) < max_lines:
        pts = points[remaining]
        best = None
        for _ in range(200):
            i, j = rng.choice(len(pts), 2, replace=False)
            d = pts[j] - pts[i]
            ln = np.linalg.norm(d)
            if ln < 1e-9:
                continue
            nrm = np.array([-d[1], d[0]]) / ln
            dist = np.abs((pts - pts[i]) @ nrm)
            inl = dist <= tol
            if best is None or inl.sum() > best.sum():
                best = inl
        if best is None or best.sum() < min_inliers:
            break
        line = im.fit_line_tls(pts[best])
        dist = np.abs(line.signed_distance(points[remaining]))
        inl = dist <= tol
        lines.append((line, remaining[inl]))
        remaining = remaining[~inl]
    return lines


def detect_circle_board(img: im.Image, spec: BoardSpec,
                        seed: int = 0) -> CornerSet:
    """Circle-grid detection anchored on the two black-circle columns, with
    prediction-based completion of missing centers."""
    gray = im.to_gray(img)
    g = gray.data
    window = max(11, 2 * (min(g.shape) // 12) + 1)
    bright = im.adaptive_threshold(gray, window=window, offset=-12.0).data > 0
    dark = im.adaptive_threshold(gray, window=window, offset=12.0).data == 0
    dark_circles = _find_circles(g, dark, dark=True)
    bright_circles = _find_circles(g, bright, dark=False)
    if len(dark_circles) < 4:
        raise NoBoard("not enough black circles")

    black_centers = np.array([c for c, _ in dark_circles])
    black_radii = np.array([r for _, r in dark_circles])
    scale = float(np.median(black_radii)) / spec.black_radius  # px per meter
    pitch_px = spec.pitch * scale

    lines = _ransac_lines(black_centers, tol=0.15 * pitch_px,
                          min_inliers=min(3, spec.rows), seed=seed)
    if len(lines) < 2:
        raise NoBoard("black-circle columns not found")

    # four-constraint filtering over line pairs
    expected_gap = abs(spec.black_cols[1] - spec.black_cols[0]) * pitch_px
    candidates = []
    for a in range(len(lines)):
        for b in range(a + 1, len(lines)):
            la, ia = lines[a]
            lb, ib = lines[b]
            # 1) parallel
            na = np.array([la.alpha, la.beta])
            nb = np.array([lb.alpha, lb.beta])
            if abs(abs(na @ nb) - 1.0) > 1 - math.cos(math.radians(3.0)):
                continue
            # 2) similar black radii
            ra = black_radii[ia]
            rb = black_radii[ib]
            if max(ra.mean(), rb.mean()) / min(ra.mean(), rb.mean()) > 1.3:
                continue
            # 3) projections onto the opposite line coincide
            da = np.array([-la.beta, la.alpha])
            ta = black_centers[ia] @ da
            tb = black_centers[ib] @ da
            lo, hi = max(ta.min(), tb.min()), min(ta.max(), tb.max())
            span = max(ta.max() - ta.min(), tb.max() - tb.min())
            if span <= 0 or (hi - lo) < 0.7 * span:
                continue
            # 4) line spacing consistent with pitch and radius scale
            gap = abs(lb.signed_distance(black_centers[ia]).mean())
            if not (0.8 * expected_gap <= gap <= 1.2 * expected_gap):
                continue
            candidates.append((a, b))
    if not candidates:
        raise NoBoard("no line pair satisfies the pattern constraints")
    if len(candidates) > 1:
        raise AmbiguousPattern(f"{len(candidates)} candidate column pairs")

    a, b = candidates[0]
    cols_sorted = sorted(spec.black_cols)
    pair = []
    for line, idx in (lines[a], lines[b]):
        centers = black_centers[idx]
        pair.append(centers)
    # identify left/right by mean x, top-to-bottom within each column
    pair.sort(key=lambda c: c.mean(axis=0)[0])
    src, dst = [], []
    grid = spec.grid_points()
    for col_idx, centers in zip(cols_sorted, pair):
        if len(centers) != spec.rows:
            raise PartialBoard(len(centers), "black column incomplete")
        order = np.argsort(centers[:, 1])
        centers = centers[order]
        for row in range(spec.rows):
            src.append(grid[row * spec.cols + col_idx])
            dst.append(centers[row])
    from .geom import apply_homography, fit_homography_dlt
    h = fit_homography_dlt(np.array(src), np.array(dst))
    predicted_px = apply_homography(h, grid)

    detected = np.array([c for c, _ in dark_circles + bright_circles])
    radii_all = np.array([r for _, r in dark_circles + bright_circles])
    pts = predicted_px.copy()
    pred_flag = np.ones(len(pts), dtype=bool)
    score = np.full(len(pts), 0.5)
    for i, p in enumerate(predicted_px):
        d = np.linalg.norm(detected - p, axis=1)
        j = int(np.argmin(d))
        if d[j] < 0.5 * radii_all[j] + 2.0:
            pts[i] = detected[j]        # completion never moves detections
            pred_flag[i] = False
            score[i] = 1.0
    return CornerSet(points=pts, rows=spec.rows, cols=spec.cols,
                     predicted=pred_flag, score=score)


# -- round-hole board (LiDAR) -------------------------------------------------------


def detect_round_hole_board(cloud: PointCloud, spec: BoardSpec, roi,
                            prior_pose: Pose, seed: int = 0) -> CornerSet:
    """Hole-center detection: ROI crop, constrained plane RANSAC, in-plane
    box fit, then a 2D mask search minimizing the in-hole return count."""
    lo = np.asarray(roi[0], dtype=float)
    hi = np.asarray(roi[1], dtype=float)
    mask = np.all((cloud.xyz >= lo) & (cloud.xyz <= hi), axis=1)
    if mask.sum() < 30:
        raise NoPlane(f"ROI holds only {int(mask.sum())} points")
    crop = cloud.select(mask)

    normal_prior = prior_pose.rotation.matrix[:, 2]
    plane = ransac_plane(crop, eps=0.012, max_iters=300,
                         constraint=(normal_prior, math.radians(30)), seed=seed)
    board_pts = crop.xyz[plane.inlier_indices]

    n = plane.normal
    ex_prior = prior_pose.rotation.matrix[:, 0]
    e1 = ex_prior - (ex_prior @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    centroid = board_pts.mean(axis=0)
    q = board_pts - centroid
    p2 = np.column_stack([q @ e1, q @ e2])

    # in-plane orientation from PCA, kept close to the prior axes
    cov = p2.T @ p2
    w, v = np.linalg.eigh(cov)
    axis = v[:, 1]
    phi = math.atan2(axis[1], axis[0])
    phi = (phi + math.pi / 2) % math.pi - math.pi / 2  # fold to (-90, 90]
    if abs(phi) > math.pi / 4:
        phi -= math.copysign(math.pi / 2, phi)
    c, s = math.cos(-phi), math.sin(-phi)
    rot = np.array([[c, -s], [s, c]])
    pr = p2 @ rot.T
    center0 = (pr.min(axis=0) + pr.max(axis=0)) / 2

    holes = np.asarray(spec.hole_centers, dtype=float).reshape(-1, 2)
    r_search = 0.8 * spec.hole_radius

    def in_hole_count(offset):
        total = 0
        per_hole = []
        for hc in holes:
            d = np.linalg.norm(pr - (center0 + offset + hc), axis=1)
            cnt = int(np.count_nonzero(d < r_search))
            per_hole.append(cnt)
            total += cnt
        return total, per_hole

    best_off = np.zeros(2)
    best_cnt, _ = in_hole_count(best_off)
    for step, span in ((0.01, 0.10), (0.001, 0.012)):
        base = best_off.copy()
        vals = np.arange(-span, span + step / 2, step)
        for dx in vals:
            for dy in vals:
                off = base + [dx, dy]
                cnt, _ = in_hole_count(off)
                if cnt < best_cnt:
                    best_cnt, best_off = cnt, off

    # sanity: with real holes the best mask position must be nearly empty
    area = (pr.max(axis=0) - pr.min(axis=0)).prod()
    density = len(pr) / max(area, 1e-9)
    expected_full = density * math.pi * r_search ** 2 * len(holes)
    if best_cnt > 0.25 * expected_full:
        raise NoHoles(f"min in-hole count {best_cnt} too high "
                      f"(solid-plane estimate {expected_full:.0f})")

    centers2 = (center0 + best_off + holes) @ rot  # back to plane coords
    centers3 = centroid + np.outer(centers2[:, 0], e1) + np.outer(centers2[:, 1], e2)
    return CornerSet(points=centers3, rows=1, cols=len(holes))
