"""Low-level 2D geometry kernel.

Coordinates are float pixels on a raster canvas; pixel (x, y) means the
sample at integer center (x, y). Angles are degrees in [0, 360) measured
with atan2(dy, dx) on raw coordinates. All predicates use a 1e-9 tolerance
and are orientation-agnostic: nothing here assumes which way y points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

EPS = 1e-9

# Full-circle direction bins: 15 bins of 24 degrees each.
BIN_COUNT = 15
BIN_WIDTH_DEG = 360.0 / BIN_COUNT


class EmptyMaskError(ValueError):
    """Raised when an operation needs at least one foreground pixel."""


class DegenerateTangentError(ValueError):
    """Raised when no usable tangent exists anywhere on a boundary."""


class DegeneratePointsError(ValueError):
    """Raised when a point set is too degenerate to fit a segment."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __iter__(self):
        return iter((self.x, self.y))


@dataclass(frozen=True)
class Segment2:
    a: Point2
    b: Point2

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)

    @property
    def midpoint(self) -> Point2:
        return Point2((self.a.x + self.b.x) / 2.0, (self.a.y + self.b.y) / 2.0)


def distance(p: Point2, q: Point2) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def direction_degrees(a: Point2, b: Point2) -> float:
    """Direction of the vector a->b in degrees, normalized to [0, 360)."""
    theta = math.degrees(math.atan2(b.y - a.y, b.x - a.x))
    return theta % 360.0


def angular_distance(a: float, b: float) -> float:
    """Smallest absolute difference between two directions, in [0, 180]."""
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def bin_direction(theta: float) -> int:
    """Index of the 24-degree bin containing direction theta."""
    k = int((theta % 360.0) // BIN_WIDTH_DEG)
    return min(k, BIN_COUNT - 1)


def bin_center(k: int) -> float:
    """Center direction of bin k, in degrees."""
    return (k + 0.5) * BIN_WIDTH_DEG


def _cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def segments_properly_intersect(s1: Segment2, s2: Segment2) -> bool:
    """True iff the segments cross at a point interior to at least one side.

    Sharing exactly one endpoint (within 1e-9) does not count; collinear
    overlap of positive length does. One segment merely touching the other's
    interior with an endpoint counts: that is still a planarity violation.
    """
    ax, ay = s1.a.x, s1.a.y
    rx, ry = s1.b.x - ax, s1.b.y - ay
    cx, cy = s2.a.x, s2.a.y
    sx, sy = s2.b.x - cx, s2.b.y - cy
    qpx, qpy = cx - ax, cy - ay

    r_len = math.hypot(rx, ry)
    s_len = math.hypot(sx, sy)
    rxs = _cross(rx, ry, sx, sy)

    if abs(rxs) <= EPS * max(r_len * s_len, 1.0):
        # Parallel. Crossing only possible via collinear overlap.
        if r_len <= EPS:
            return False
        # Perpendicular distance of s2.a from the line through s1.
        if abs(_cross(qpx, qpy, rx, ry)) > EPS * max(r_len, 1.0):
            return False
        ux, uy = rx / r_len, ry / r_len
        t_c = qpx * ux + qpy * uy
        t_d = (s2.b.x - ax) * ux + (s2.b.y - ay) * uy
        lo = max(0.0, min(t_c, t_d))
        hi = min(r_len, max(t_c, t_d))
        return hi - lo > EPS

    t = _cross(qpx, qpy, sx, sy) / rxs
    u = _cross(qpx, qpy, rx, ry) / rxs
    tol_t = EPS / max(r_len, EPS)
    tol_u = EPS / max(s_len, EPS)
    if not (-tol_t <= t <= 1.0 + tol_t and -tol_u <= u <= 1.0 + tol_u):
        return False
    # Unique contact point. If the segments share an endpoint, that shared
    # endpoint is the contact, which is allowed.
    for p in (s1.a, s1.b):
        for q in (s2.a, s2.b):
            if distance(p, q) <= EPS:
                return False
    return True


def segments_touch(s1: Segment2, s2: Segment2) -> bool:
    """True iff the closed segments share at least one point (within 1e-9)."""
    ax, ay = s1.a.x, s1.a.y
    rx, ry = s1.b.x - ax, s1.b.y - ay
    cx, cy = s2.a.x, s2.a.y
    sx, sy = s2.b.x - cx, s2.b.y - cy
    qpx, qpy = cx - ax, cy - ay

    r_len = math.hypot(rx, ry)
    s_len = math.hypot(sx, sy)
    rxs = _cross(rx, ry, sx, sy)

    if abs(rxs) > EPS * max(r_len * s_len, 1.0):
        t = _cross(qpx, qpy, sx, sy) / rxs
        u = _cross(qpx, qpy, rx, ry) / rxs
        tol_t = EPS / max(r_len, EPS)
        tol_u = EPS / max(s_len, EPS)
        return -tol_t <= t <= 1.0 + tol_t and -tol_u <= u <= 1.0 + tol_u

    # Parallel: overlap requires collinearity, then interval contact.
    if r_len <= EPS and s_len <= EPS:
        return distance(s1.a, s2.a) <= EPS
    if r_len <= EPS:
        return segments_touch(s2, s1)
    if abs(_cross(qpx, qpy, rx, ry)) > EPS * max(r_len, 1.0):
        return False
    ux, uy = rx / r_len, ry / r_len
    t_c = qpx * ux + qpy * uy
    t_d = (s2.b.x - ax) * ux + (s2.b.y - ay) * uy
    lo = max(0.0, min(t_c, t_d))
    hi = min(r_len, max(t_c, t_d))
    return hi - lo >= -EPS


def segment_hits_ray(seg: Segment2, origin: Point2, direction_deg: float,
                     length: float = 100.0, width: float = 2.0) -> bool:
    """True iff seg meets the closed rectangle swept by a finite-width ray.

    The rectangle extends `length` px from `origin` along `direction_deg`
    and spans `width` px across it. Touching the rectangle boundary counts.
    """
    theta = math.radians(direction_deg)
    dx, dy = math.cos(theta), math.sin(theta)
    # Local frame: s along the ray, t across it.
    pts = []
    for p in (seg.a, seg.b):
        px, py = p.x - origin.x, p.y - origin.y
        pts.append((px * dx + py * dy, -px * dy + py * dx))
    (s0, t0), (s1, t1) = pts
    return _segment_meets_box(s0, t0, s1, t1,
                              0.0, length, -width / 2.0, width / 2.0)


def _segment_meets_box(x0: float, y0: float, x1: float, y1: float,
                       xmin: float, xmax: float,
                       ymin: float, ymax: float) -> bool:
    """Liang-Barsky test of a segment against a closed axis-aligned box."""
    dx, dy = x1 - x0, y1 - y0
    t_lo, t_hi = 0.0, 1.0
    for p, q in ((-dx, x0 - (xmin - EPS)), (dx, (xmax + EPS) - x0),
                 (-dy, y0 - (ymin - EPS)), (dy, (ymax + EPS) - y0)):
        if abs(p) <= EPS:
            if q < 0.0:
                return False
            continue
        t = q / p
        if p < 0.0:
            t_lo = max(t_lo, t)
        else:
            t_hi = min(t_hi, t)
        if t_lo > t_hi:
            return False
    return True


def segment_hits_ray_batch(ax: np.ndarray, ay: np.ndarray,
                           bx: np.ndarray, by: np.ndarray,
                           origin: Point2, direction_deg: float,
                           length: float = 100.0,
                           width: float = 2.0) -> np.ndarray:
    """Vectorized segment_hits_ray over segments (ax,ay)-(bx,by).

    Returns a boolean array; semantics match segment_hits_ray exactly
    (closed rectangle, 1e-9 tolerance).
    """
    theta = math.radians(direction_deg)
    dx, dy = math.cos(theta), math.sin(theta)
    pax = ax - origin.x
    pay = ay - origin.y
    pbx = bx - origin.x
    pby = by - origin.y
    s0 = pax * dx + pay * dy
    t0 = -pax * dy + pay * dx
    s1 = pbx * dx + pby * dy
    t1 = -pbx * dy + pby * dx

    ds = s1 - s0
    dt = t1 - t0
    lo = np.zeros_like(s0)
    hi = np.ones_like(s0)
    ok = np.ones(s0.shape, dtype=bool)
    half = width / 2.0
    for p, q in ((-ds, s0 - (0.0 - EPS)), (ds, (length + EPS) - s0),
                 (-dt, t0 - (-half - EPS)), (dt, (half + EPS) - t0)):
        para = np.abs(p) <= EPS
        ok &= ~(para & (q < 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(para, 0.0, q / np.where(para, 1.0, p))
        neg = (p < 0.0) & ~para
        pos = (p > 0.0) & ~para
        lo = np.where(neg, np.maximum(lo, t), lo)
        hi = np.where(pos, np.minimum(hi, t), hi)
    return ok & (lo <= hi)


def rasterize_segment(seg: Segment2, width: float = 2.0,
                      canvas: tuple[int, int] = (256, 256)) -> np.ndarray:
    """Boolean mask of canvas pixels within width/2 of the segment.

    `canvas` is (width_px, height_px); the result has shape (h, w) indexed
    [y, x]. Distance is from the pixel center to the closed segment,
    inclusive at exactly width/2.
    """
    cw, ch = canvas
    out = np.zeros((ch, cw), dtype=bool)
    half = width / 2.0 + EPS
    x_lo = max(0, int(math.floor(min(seg.a.x, seg.b.x) - half)))
    x_hi = min(cw - 1, int(math.ceil(max(seg.a.x, seg.b.x) + half)))
    y_lo = max(0, int(math.floor(min(seg.a.y, seg.b.y) - half)))
    y_hi = min(ch - 1, int(math.ceil(max(seg.a.y, seg.b.y) + half)))
    if x_lo > x_hi or y_lo > y_hi:
        return out
    ys, xs = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1]
    apx = xs - seg.a.x
    apy = ys - seg.a.y
    abx = seg.b.x - seg.a.x
    aby = seg.b.y - seg.a.y
    ab2 = abx * abx + aby * aby
    if ab2 <= EPS * EPS:
        d2 = apx * apx + apy * apy
    else:
        t = np.clip((apx * abx + apy * aby) / ab2, 0.0, 1.0)
        ex = apx - t * abx
        ey = apy - t * aby
        d2 = ex * ex + ey * ey
    out[y_lo:y_hi + 1, x_lo:x_hi + 1] = d2 <= half * half
    return out


def segment_pixels(seg: Segment2, width: float = 2.0,
                   canvas: tuple[int, int] = (256, 256)) -> np.ndarray:
    """(n, 2) int array of [x, y] pixels covered by the rasterized segment."""
    mask = rasterize_segment(seg, width, canvas)
    ys, xs = np.nonzero(mask)
    return np.column_stack([xs, ys])


# Moore neighborhood in clockwise order for y-down rasters, starting east.
_MOORE = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def trace_boundary(mask: np.ndarray) -> np.ndarray:
    """Ordered boundary pixels of the largest 8-connected component.

    Returns an (n, 2) int array of [x, y] pixels forming a closed cycle:
    consecutive entries are 8-adjacent and the last is 8-adjacent to the
    first. Pixels may repeat where the component is one pixel wide. The
    cycle is oriented so its signed (shoelace) area in raw coordinates is
    non-negative. Raises EmptyMaskError on an all-background mask.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMaskError("mask has no foreground pixels")
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count > 1:
        sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, count + 1))
        keep = int(np.argmax(sizes)) + 1
        comp = labels == keep
    else:
        comp = labels > 0

    h, w = comp.shape

    def fg(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and comp[y, x]

    sy, sx = np.unravel_index(int(np.argmax(comp)), comp.shape)
    start = (int(sx), int(sy))
    if not any(fg(start[0] + dx, start[1] + dy) for dx, dy in _MOORE):
        return np.array([[start[0], start[1]]], dtype=int)

    # Moore tracing with Jacob's stopping criterion: stop when the start
    # pixel is re-entered from the original backtrack state.
    boundary = [start]
    backtrack = (start[0] - 1, start[1])  # scan order guarantees background
    initial_state = (start, backtrack)
    cur, prev = start, backtrack
    max_steps = 4 * int(comp.sum()) + 8
    for _ in range(max_steps):
        d = _MOORE_INDEX[(prev[0] - cur[0], prev[1] - cur[1])]
        nxt = None
        for k in range(1, 9):
            cand_dir = _MOORE[(d + k) % 8]
            cand = (cur[0] + cand_dir[0], cur[1] + cand_dir[1])
            if fg(*cand):
                prev_dir = _MOORE[(d + k - 1) % 8]
                nxt_prev = (cur[0] + prev_dir[0], cur[1] + prev_dir[1])
                nxt = cand
                break
        if nxt is None:  # isolated pixel, handled above
            break
        cur, prev = nxt, nxt_prev
        if (cur, prev) == initial_state:
            break
        boundary.append(cur)

    pts = np.array(boundary, dtype=int)
    if len(pts) >= 3:
        x = pts[:, 0].astype(float)
        y = pts[:, 1].astype(float)
        area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        if area2 < 0.0:
            pts = np.vstack([pts[:1], pts[1:][::-1]])
    return pts


def outward_normal(mask: np.ndarray, boundary: np.ndarray,
                   index: int) -> tuple[float, float]:
    """Unit normal at boundary[index] pointing away from the mask interior.

    The tangent is the central difference boundary[i+2] - boundary[i-2]
    (cyclic); if degenerate, earlier indices are tried in turn. Orientation
    is fixed by sampling the mask 2 px along each candidate normal. Raises
    DegenerateTangentError if no index yields a usable tangent.
    """
    mask = np.asarray(mask, dtype=bool)
    n = len(boundary)
    h, w = mask.shape

    tangent = None
    for attempt in range(n):
        i = (index - attempt) % n
        tx = float(boundary[(i + 2) % n][0] - boundary[(i - 2) % n][0])
        ty = float(boundary[(i + 2) % n][1] - boundary[(i - 2) % n][1])
        norm = math.hypot(tx, ty)
        if norm > EPS:
            tangent = (tx / norm, ty / norm)
            break
    if tangent is None:
        raise DegenerateTangentError("boundary has no non-degenerate tangent")

    nx, ny = -tangent[1], tangent[0]
    px, py = float(boundary[index][0]), float(boundary[index][1])

    def sample(sx: float, sy: float) -> bool:
        ix, iy = int(round(sx)), int(round(sy))
        return 0 <= ix < w and 0 <= iy < h and mask[iy, ix]

    plus_inside = sample(px + 2.0 * nx, py + 2.0 * ny)
    minus_inside = sample(px - 2.0 * nx, py - 2.0 * ny)
    if plus_inside and not minus_inside:
        return (-nx, -ny)
    if minus_inside and not plus_inside:
        return (nx, ny)
    # Both samples agree (thin mask or far from interior): point away from
    # the component centroid as a deterministic fallback.
    ys, xs = np.nonzero(mask)
    cx, cy = float(xs.mean()), float(ys.mean())
    if (px - cx) * nx + (py - cy) * ny >= 0.0:
        return (nx, ny)
    return (-nx, -ny)


def fit_line_segment(points: np.ndarray) -> Segment2:
    """Best-fit segment through points, by principal axis of their spread.

    Endpoints are the extreme projections of the points onto the axis
    through their centroid. When the two principal directions tie, the one
    with the smaller angle in [0, 180) wins. Raises DegeneratePointsError
    for fewer than two distinct points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise DegeneratePointsError("need at least two points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    if float(np.abs(centered).max()) <= EPS:
        raise DegeneratePointsError("points are coincident")
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[1] - eigvals[0] <= 1e-12 * max(eigvals[1], 1.0):
        # Isotropic spread: prefer the direction of smaller angle.
        cands = [eigvecs[:, 0], eigvecs[:, 1]]
        cands = [_canonical_direction(v) for v in cands]
        v = min(cands, key=lambda u: math.atan2(u[1], u[0]) % math.pi)
    else:
        v = _canonical_direction(eigvecs[:, 1])
    t = centered @ v
    lo = centroid + float(t.min()) * v
    hi = centroid + float(t.max()) * v
    return Segment2(Point2(float(lo[0]), float(lo[1])),
                    Point2(float(hi[0]), float(hi[1])))


def _canonical_direction(v: np.ndarray) -> np.ndarray:
    """Flip v so its angle lies in [0, 180): y > 0, or y == 0 and x > 0."""
    if v[1] < 0.0 or (v[1] == 0.0 and v[0] < 0.0):
        return -v
    return v
