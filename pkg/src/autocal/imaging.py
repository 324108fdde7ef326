"""Raster image processing without OpenCV: IO, binarization, morphology,
Canny edges, contour tracing and total-least-squares line fitting.

Images are uint8, single channel (H, W) or RGB (H, W, 3). Binary images use
{0, 255}. Pixel coordinates are (x, y) = (column, row) with sub-pixel values
referring to pixel centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadThresholds, Degenerate, ParseError, WindowTooLarge


class Image:
    """Immutable uint8 raster."""

    __slots__ = ("data",)

    def __init__(self, data):
        d = np.asarray(data)
        if d.dtype != np.uint8:
            d = np.clip(np.round(d), 0, 255).astype(np.uint8)
        else:
            d = d.copy()
        if d.ndim == 2:
            pass
        elif d.ndim == 3 and d.shape[2] in (1, 3):
            if d.shape[2] == 1:
                d = d[:, :, 0]
        else:
            raise ValueError(f"unsupported image shape {d.shape}")
        d.flags.writeable = False
        object.__setattr__(self, "data", d)

    def __setattr__(self, name, value):
        raise AttributeError("Image is immutable")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


def to_gray(img: Image) -> Image:
    if img.channels == 1:
        return img
    rgb = img.data.astype(float)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return Image(luma)


# -- PGM / PPM ----------------------------------------------------------------

def save_image(img: Image, path) -> None:
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + f"\n{img.width} {img.height}\n255\n".encode()
    with open(path, "wb") as f:
        f.write(header + img.data.tobytes())


def load_image(path) -> Image:
    with open(path, "rb") as f:
        blob = f.read()
    tokens = []
    i = 0
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed
    while len(tokens) < 4:
        if i >= len(blob):
            raise ParseError("truncated PNM header")
        c = blob[i:i + 1]
        if c == b"#":
            while i < len(blob) and blob[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(blob) and not blob[j:j + 1].isspace():
                j += 1
            tokens.append(blob[i:j])
            i = j
    i += 1  # single whitespace after maxval
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}")
    if maxval != 255:
        raise ParseError(f"only maxval 255 supported, got {maxval}")
    ch = 1 if magic == b"P5" else 3
    need = w * h * ch
    body = blob[i:i + need]
    if len(body) != need:
        raise ParseError(f"expected {need} sample bytes, got {len(body)}")
    arr = np.frombuffer(body, dtype=np.uint8).reshape(
        (h, w) if ch == 1 else (h, w, 3))
    return Image(arr)


# -- thresholding and morphology ------------------------------------------------

def _box_mean(a: np.ndarray, window: int) -> np.ndarray:
    """Local mean over a window x window box clamped at the borders."""
    h, w = a.shape
    half = window // 2
    ii = np.zeros((h + 1, w + 1))
    ii[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
    ys, xs = np.arange(h), np.arange(w)
    y0 = np.clip(ys - half, 0, h)[:, None]
    y1 = np.clip(ys + half + 1, 0, h)[:, None]
    x0 = np.clip(xs - half, 0, w)[None, :]
    x1 = np.clip(xs + half + 1, 0, w)[None, :]
    total = ii[y1, x1] - ii[y0, x1] - ii[y1, x0] + ii[y0, x0]
    count = (y1 - y0) * (x1 - x0)
    return total / count


def adaptive_threshold(img: Image, window: int = 31, offset: float = 10.0) -> Image:
    """Binarize: 255 where value > local_mean(window) - offset, else 0."""
    if img.channels != 1:
        raise ValueError("adaptive_threshold expects a single-channel image")
    if window > min(img.width, img.height):
        raise WindowTooLarge(f"window {window} exceeds image size "
                             f"{img.width}x{img.height}")
    a = img.data.astype(float)
    mean = _box_mean(a, window)
    return Image(np.where(a > mean - offset, 255, 0))


def dilate(img: Image, radius: int = 1) -> Image:
    """Morphological dilation of white with a (2r+1) square kernel."""
    if img.channels != 1:
        raise ValueError("dilate expects a single-channel image")
    if radius <= 0:
        return img
    a = img.data
    p = np.pad(a, radius, mode="constant", constant_values=0)
    out = np.zeros_like(a)
    h, w = a.shape
    for dy in range(2 * radius + 1):
        for dx in range(2 * radius + 1):
            np.maximum(out, p[dy:dy + h, dx:dx + w], out=out)
    return Image(out)


def erode(img: Image, radius: int = 1) -> Image:
    return Image(255 - dilate(Image(255 - img.data), radius).data)


# -- gradients and Canny --------------------------------------------------------

_GAUSS5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0])
_GAUSS5 = _GAUSS5 / _GAUSS5.sum()


def _conv_sep(a: np.ndarray, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """Separable 2D convolution with edge replication."""
    rx, ry = len(kx) // 2, len(ky) // 2
    p = np.pad(a, ((ry, ry), (rx, rx)), mode="edge")
    tmp = np.zeros((a.shape[0] + 2 * ry, a.shape[1]))
    for i, k in enumerate(kx):
        tmp += k * p[:, i:i + a.shape[1]]
    out = np.zeros(a.shape)
    for i, k in enumerate(ky):
        out += k * tmp[i:i + a.shape[0], :]
    return out


def sobel_gradients(img: Image) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel (gx, gy) of a gray image, float arrays."""
    a = to_gray(img).data.astype(float)
    gx = _conv_sep(a, np.array([-1.0, 0.0, 1.0]), np.array([1.0, 2.0, 1.0]))
    gy = _conv_sep(a, np.array([1.0, 2.0, 1.0]), np.array([-1.0, 0.0, 1.0]))
    return gx, gy


def gradient_magnitude(img: Image, smooth: bool = True) -> np.ndarray:
    a = to_gray(img).data.astype(float)
    if smooth:
        a = _conv_sep(a, _GAUSS5, _GAUSS5)
    gx, gy = sobel_gradients(Image(a))
    return np.hypot(gx, gy)


def canny_edges(img: Image, low: float, high: float) -> Image:
    """Canny: Gaussian smoothing, 3x3 Sobel, 4-direction quantized NMS,
    double-threshold hysteresis. Returns a {0, 255} edge image."""
    if not (0 < low < high):
        raise BadThresholds(f"need 0 < low < high, got low={low}, high={high}")
    a = to_gray(img).data.astype(float)
    a = _conv_sep(a, _GAUSS5, _GAUSS5)
    gx = _conv_sep(a, np.array([-1.0, 0.0, 1.0]), np.array([1.0, 2.0, 1.0]))
    gy = _conv_sep(a, np.array([1.0, 2.0, 1.0]), np.array([-1.0, 0.0, 1.0]))
    mag = np.hypot(gx, gy)
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)

    h, w = mag.shape
    m = np.pad(mag, 1, mode="constant")
    nms = np.zeros_like(mag)
    # direction bins: 0=E/W, 1=NE/SW, 2=N/S, 3=NW/SE
    bins = ((ang + 22.5) // 45).astype(int) % 4
    offs = {0: ((0, 1), (0, -1)), 1: ((1, 1), (-1, -1)),
            2: ((1, 0), (-1, 0)), 3: ((1, -1), (-1, 1))}
    for b, ((dy1, dx1), (dy2, dx2)) in offs.items():
        sel = bins == b
        n1 = m[1 + dy1:h + 1 + dy1, 1 + dx1:w + 1 + dx1]
        n2 = m[1 + dy2:h + 1 + dy2, 1 + dx2:w + 1 + dx2]
        keep = sel & (mag >= n1) & (mag >= n2)
        nms[keep] = mag[keep]

    strong = nms >= high
    weak = nms >= low
    # hysteresis: grow strong through weak, 8-connected
    out = strong.copy()
    frontier = strong
    while True:
        p = np.pad(out, 1, mode="constant")
        grown = np.zeros_like(out)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                grown |= p[1 + dy:h + 1 + dy, 1 + dx:w + 1 + dx]
        new = grown & weak & ~out
        if not new.any():
            break
        out |= new
        frontier = new
    return Image(np.where(out, 255, 0))


# -- connected components and contours -------------------------------------------

def label_components(binary: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected labeling of nonzero pixels; run-based union-find."""
    mask = binary > 0
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    parent: list[int] = [0]

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    prev_runs: list[tuple[int, int, int]] = []  # (x0, x1, label)
    for y in range(h):
        row = mask[y]
        if not row.any():
            prev_runs = []
            continue
        d = np.diff(row.astype(np.int8))
        starts = list(np.nonzero(d == 1)[0] + 1)
        ends = list(np.nonzero(d == -1)[0] + 1)
        if row[0]:
            starts.insert(0, 0)
        if row[-1]:
            ends.append(w)
        runs = []
        for x0, x1 in zip(starts, ends):
            lab = 0
            for px0, px1, plab in prev_runs:
                if px0 <= x1 and x0 <= px1:  # touch incl. diagonal
                    if lab == 0:
                        lab = plab
                    else:
                        union(lab, plab)
            if lab == 0:
                parent.append(len(parent))
                lab = len(parent) - 1
            labels[y, x0:x1] = lab
            runs.append((x0 - 1, x1, lab))
        prev_runs = runs
    # flatten labels
    remap = np.zeros(len(parent), dtype=np.int32)
    nxt = 0
    for i in range(1, len(parent)):
        r = find(i)
        if remap[r] == 0:
            nxt += 1
            remap[r] = nxt
        remap[i] = remap[r]
    return remap[labels], nxt


@dataclass(frozen=True)
class Contour:
    """Closed outer boundary of one white component.

    `points` are (x, y) boundary pixels in Moore-trace order; `area` is the
    component pixel count and `centroid` the component (not boundary) mean.
    """

    points: np.ndarray
    area: float
    centroid: np.ndarray

    def radii(self) -> np.ndarray:
        return np.linalg.norm(self.points - self.centroid, axis=1)


_MOORE = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]


def _trace_boundary(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbor boundary trace (y, x tuples) starting at the
    topmost-leftmost pixel of the component."""
    h, w = mask.shape

    def at(y, x):
        return 0 <= y < h and 0 <= x < w and mask[y, x]

    boundary = [start]
    # entering direction: we came from the left of the start pixel
    prev_dir = 6  # index of (0, -1) in _MOORE
    cur = start
    while True:
        found = False
        for i in range(8):
            d = (prev_dir + 1 + i) % 8
            dy, dx = _MOORE[d]
            ny, nx = cur[0] + dy, cur[1] + dx
            if at(ny, nx):
                # backtrack: neighbor index we arrived from
                prev_dir = (d + 4) % 8
                cur = (ny, nx)
                found = True
                break
        if not found:
            break  # isolated pixel
        if cur == start and len(boundary) > 1:
            break
        boundary.append(cur)
    return boundary


def trace_contours(binary: Image, min_area: float = 4.0) -> list[Contour]:
    """Outer boundaries of white 8-connected components with area >= min_area."""
    if binary.channels != 1:
        raise ValueError("trace_contours expects a binary single-channel image")
    mask = binary.data > 0
    labels, n = label_components(mask)
    out = []
    for lab in range(1, n + 1):
        comp = labels == lab
        ys, xs = np.nonzero(comp)
        area = float(len(ys))
        if area < min_area:
            continue
        start = (int(ys.min()),
                 int(xs[ys == ys.min()].min()))
        b = _trace_boundary(comp, start)
        pts = np.array([(x, y) for y, x in b], dtype=float)
        centroid = np.array([xs.mean(), ys.mean()])
        out.append(Contour(points=pts, area=area, centroid=centroid))
    return out


# -- total least squares line -----------------------------------------------------

@dataclass(frozen=True)
class Line2D:
    """Line alpha*x + beta*y - gamma = 0 with alpha^2 + beta^2 = 1."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        n = math.hypot(self.alpha, self.beta)
        if abs(n - 1.0) > 1e-12:
            object.__setattr__(self, "alpha", self.alpha / n)
            object.__setattr__(self, "beta", self.beta / n)
            object.__setattr__(self, "gamma", self.gamma / n)

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.alpha * pts[:, 0] + self.beta * pts[:, 1] - self.gamma


def fit_line_tls(points) -> Line2D:
    """Total-least-squares (orthogonal) line through >= 2 distinct points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise Degenerate(f"need >= 2 points, got {len(pts)}")
    c = pts.mean(axis=0)
    q = pts - c
    cov = q.T @ q
    if np.abs(cov).max() < 1e-18:
        raise Degenerate("all points identical")
    w, v = np.linalg.eigh(cov)
    normal = v[:, 0]  # eigenvector of smallest eigenvalue
    alpha, beta = float(normal[0]), float(normal[1])
    gamma = float(normal @ c)
    return Line2D(alpha, beta, gamma)
