"""Domain model: detections, planar graphs, faces, and graph post-processing.

The two central types are DetectionSet (everything a detector produced for
one building) and PlanarGraph (ground truth and reconstruction output).
Face enumeration gives the bounded faces of a planar embedding; those faces
are the "regions" used by the simulator and the metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import (
    EPS,
    Point2,
    Segment2,
    angular_distance,
    direction_degrees,
    distance,
    rasterize_segment,
    segments_properly_intersect,
)

DEFAULT_CANVAS = (256, 256)

# Number of angular bins a corner detection reports.
N_DIRECTION_BINS = 15

CORNER_CONF_THRESHOLD = 0.2
REGION_CONF_THRESHOLD = 0.5
MAX_REGIONS = 100


class InvalidGraphError(ValueError):
    """A graph violates the planar-graph invariants."""


class InvalidDetectionsError(ValueError):
    """A detection set violates its structural invariants."""


class OffCanvasError(ValueError):
    """A segment rasterizes to zero on-canvas pixels."""


@dataclass(frozen=True)
class CornerDetection:
    id: int
    position: Point2
    confidence: float
    direction_bins: tuple[float, ...]  # one confidence per 24-degree bin


@dataclass
class EdgeConfidenceMap:
    values: np.ndarray  # float64, shape (h, w), entries in [0, 1]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, canvas: tuple[int, int] = DEFAULT_CANVAS) -> "EdgeConfidenceMap":
        w, h = canvas
        return cls(np.zeros((h, w), dtype=np.float64))


@dataclass(frozen=True)
class EdgeCandidate:
    id: int
    corner_a: int
    corner_b: int
    confidence: float


@dataclass
class RegionDetection:
    id: int
    mask: np.ndarray  # bool, shape (h, w)
    confidence: float


@dataclass
class RegionPairBoundary:
    region_a: int
    region_b: int
    masks: list[np.ndarray]  # one mask per shared-boundary instance


@dataclass
class DetectionSet:
    canvas: tuple[int, int]
    corners: list[CornerDetection]
    edge_map: EdgeConfidenceMap
    regions: list[RegionDetection]
    rr_boundaries: list[RegionPairBoundary]

    def corner_by_id(self) -> dict[int, CornerDetection]:
        return {c.id: c for c in self.corners}

    def validate(self) -> None:
        w, h = self.canvas
        if (self.edge_map.width, self.edge_map.height) != (w, h):
            raise InvalidDetectionsError("edge map does not match canvas")
        seen: set[int] = set()
        for c in self.corners:
            if c.id in seen:
                raise InvalidDetectionsError(f"duplicate corner id {c.id}")
            seen.add(c.id)
            if not (0.0 <= c.position.x <= w - 1 and 0.0 <= c.position.y <= h - 1):
                raise InvalidDetectionsError(f"corner {c.id} off canvas")
            if not (CORNER_CONF_THRESHOLD <= c.confidence <= 1.0 + EPS):
                raise InvalidDetectionsError(
                    f"corner {c.id} confidence {c.confidence} below threshold")
            if len(c.direction_bins) != N_DIRECTION_BINS:
                raise InvalidDetectionsError(
                    f"corner {c.id} needs {N_DIRECTION_BINS} direction bins")
        if len(self.regions) > MAX_REGIONS:
            raise InvalidDetectionsError("too many regions")
        region_ids: set[int] = set()
        for r in self.regions:
            if r.id in region_ids:
                raise InvalidDetectionsError(f"duplicate region id {r.id}")
            region_ids.add(r.id)
            if r.mask.shape != (h, w):
                raise InvalidDetectionsError(f"region {r.id} mask shape mismatch")
            if not r.mask.any():
                raise InvalidDetectionsError(f"region {r.id} mask empty")
            if not (REGION_CONF_THRESHOLD <= r.confidence <= 1.0 + EPS):
                raise InvalidDetectionsError(
                    f"region {r.id} confidence below threshold")
        for b in self.rr_boundaries:
            if b.region_a == b.region_b:
                raise InvalidDetectionsError("rr boundary links a region to itself")
            if b.region_a not in region_ids or b.region_b not in region_ids:
                raise InvalidDetectionsError("rr boundary references unknown region")
            for m in b.masks:
                if m.shape != (h, w):
                    raise InvalidDetectionsError("rr boundary mask shape mismatch")
                if not m.any():
                    raise InvalidDetectionsError("rr boundary mask empty")


@dataclass(frozen=True)
class FeatureConfig:
    """Which objective/constraint features the program builder enables.

    Edge primitives are always on; the flags mirror the ablation axes:
    corner primitives, corner-to-edge relationships, region primitives,
    region-to-region relationships.
    """

    use_corners: bool = True
    use_ce_relations: bool = True
    use_regions: bool = True
    use_rr_relations: bool = True

    def __post_init__(self):
        if self.use_ce_relations and not self.use_corners:
            raise ValueError("corner-to-edge relations require corner primitives")
        if self.use_rr_relations and not self.use_regions:
            raise ValueError("region-to-region relations require region primitives")

    @classmethod
    def all(cls) -> "FeatureConfig":
        return cls(True, True, True, True)

    @classmethod
    def edges_only(cls) -> "FeatureConfig":
        return cls(False, False, False, False)

    @classmethod
    def from_tokens(cls, tokens) -> "FeatureConfig":
        toks = {t.strip().lower() for t in tokens if t.strip()}
        if "all" in toks:
            return cls.all()
        known = {"edges", "corners", "ce", "regions", "rr"}
        unknown = toks - known
        if unknown:
            raise ValueError(f"unknown feature tokens: {sorted(unknown)}")
        return cls(
            use_corners="corners" in toks,
            use_ce_relations="ce" in toks,
            use_regions="regions" in toks,
            use_rr_relations="rr" in toks,
        )

    def tokens(self) -> list[str]:
        out = ["edges"]
        if self.use_corners:
            out.append("corners")
        if self.use_ce_relations:
            out.append("ce")
        if self.use_regions:
            out.append("regions")
        if self.use_rr_relations:
            out.append("rr")
        return out


@dataclass
class PlanarGraph:
    vertices: dict[int, Point2]
    edges: list[tuple[int, int]]

    def __post_init__(self):
        self.edges = sorted((min(a, b), max(a, b)) for a, b in self.edges)

    def copy(self) -> "PlanarGraph":
        return PlanarGraph(dict(self.vertices), list(self.edges))

    def degree(self) -> dict[int, int]:
        deg = {v: 0 for v in self.vertices}
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def neighbors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.vertices}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def edge_segment(self, edge: tuple[int, int]) -> Segment2:
        a, b = edge
        return Segment2(self.vertices[a], self.vertices[b])

    def is_empty(self) -> bool:
        return not self.vertices and not self.edges

    def validate(self, canvas: tuple[int, int] | None = None) -> None:
        """Raise InvalidGraphError unless all planar-graph invariants hold."""
        for vid, p in self.vertices.items():
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise InvalidGraphError(f"vertex {vid} not finite")
            if canvas is not None:
                w, h = canvas
                if not (0.0 <= p.x <= w - 1 and 0.0 <= p.y <= h - 1):
                    raise InvalidGraphError(f"vertex {vid} off canvas")
        ids = sorted(self.vertices)
        for i, u in enumerate(ids):
            for v in ids[i + 1:]:
                if distance(self.vertices[u], self.vertices[v]) < 1.0:
                    raise InvalidGraphError(f"vertices {u},{v} closer than 1 px")
        seen: set[tuple[int, int]] = set()
        for a, b in self.edges:
            if a == b:
                raise InvalidGraphError(f"self-loop at vertex {a}")
            if a not in self.vertices or b not in self.vertices:
                raise InvalidGraphError(f"edge ({a},{b}) references missing vertex")
            if (a, b) in seen:
                raise InvalidGraphError(f"duplicate edge ({a},{b})")
            seen.add((a, b))
        deg = self.degree()
        for vid, d in deg.items():
            if d < 2:
                raise InvalidGraphError(f"vertex {vid} has degree {d} < 2")
        segs = [self.edge_segment(e) for e in self.edges]
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                if segments_properly_intersect(segs[i], segs[j]):
                    raise InvalidGraphError(
                        f"edges {self.edges[i]} and {self.edges[j]} cross")


@dataclass
class Face:
    cycle: tuple[int, ...]           # vertex ids in traversal order
    polygon: np.ndarray              # (n, 2) float vertex coordinates
    mask: np.ndarray                 # bool raster of the face

    @property
    def area(self) -> float:
        x = self.polygon[:, 0]
        y = self.polygon[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def enumerate_faces(g: PlanarGraph, canvas: tuple[int, int] = DEFAULT_CANVAS,
                    validate: bool = True) -> list[Face]:
    """All bounded faces of the straight-line embedding of g.

    Half-edge traversal: from half-edge (u, v), the next half-edge leaves v
    along the first neighbor clockwise from the reversed direction (v, u) —
    ties between coincident directions broken by smaller neighbor id. The
    unbounded face comes out with negative signed area and is dropped. Each
    face is rasterized with a half-open pixel-center scanline fill, so
    adjacent faces never share pixels.
    """
    if validate:
        g.validate()
    if not g.edges:
        return []

    adj: dict[int, list[int]] = {}
    for a, b in g.edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    order: dict[int, list[int]] = {}
    for v, nbrs in adj.items():
        nbrs_sorted = sorted(
            nbrs, key=lambda u: (direction_degrees(g.vertices[v], g.vertices[u]), u))
        order[v] = nbrs_sorted

    pos_in_order: dict[int, dict[int, int]] = {
        v: {u: i for i, u in enumerate(nbrs)} for v, nbrs in order.items()}

    visited: set[tuple[int, int]] = set()
    faces: list[Face] = []
    half_edges = sorted(
        [(a, b) for a, b in g.edges] + [(b, a) for a, b in g.edges])
    for start in half_edges:
        if start in visited:
            continue
        cycle: list[int] = []
        he = start
        while he not in visited:
            visited.add(he)
            u, v = he
            cycle.append(u)
            nbrs = order[v]
            k = pos_in_order[v][u]
            w = nbrs[(k - 1) % len(nbrs)]
            he = (v, w)
        poly = np.array([[g.vertices[v].x, g.vertices[v].y] for v in cycle],
                        dtype=float)
        x = poly[:, 0]
        y = poly[:, 1]
        area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        if area2 <= EPS:
            continue
        mask = fill_polygon(poly, canvas)
        faces.append(Face(tuple(cycle), poly, mask))
    return faces


def fill_polygon(poly: np.ndarray, canvas: tuple[int, int]) -> np.ndarray:
    """Even-odd scanline fill over pixel centers, half-open on both axes.

    A pixel (x, y) is filled iff its center satisfies x_left <= x < x_right
    between consecutive crossings and the crossing count at scanline y
    (edges treated as [y0, y1) spans) is odd on its left.
    """
    w, h = canvas
    mask = np.zeros((h, w), dtype=bool)
    ys = poly[:, 1]
    y_lo = max(0, int(math.ceil(ys.min())))
    y_hi = min(h - 1, int(math.floor(ys.max())))
    n = len(poly)
    for y in range(y_lo, y_hi + 1):
        xs: list[float] = []
        for i in range(n):
            x0, y0 = poly[i]
            x1, y1 = poly[(i + 1) % n]
            if y0 == y1:
                continue
            if (y0 <= y < y1) or (y1 <= y < y0):
                t = (y - y0) / (y1 - y0)
                xs.append(x0 + t * (x1 - x0))
        xs.sort()
        for i in range(0, len(xs) - 1, 2):
            a = max(0, int(math.ceil(xs[i])))
            b = min(w - 1, int(math.ceil(xs[i + 1])) - 1)
            if a <= b:
                mask[y, a:b + 1] = True
    return mask


def merge_colinear_corners(g: PlanarGraph, tol_deg: float = 5.0) -> PlanarGraph:
    """Remove degree-2 vertices whose incident edges are straight within tol.

    A vertex v with exactly two neighbors a, b is removed (and edge a-b
    added) when the turn at v deviates from a straight line by strictly
    less than tol_deg. Merges that would create a self-loop, a duplicate
    edge, or a crossing are skipped. Runs to a fixed point; idempotent.
    """
    out = g.copy()
    while True:
        adj = out.neighbors()
        merged = False
        for v in sorted(out.vertices):
            nbrs = adj.get(v, [])
            if len(nbrs) != 2:
                continue
            a, b = nbrs
            if a == b:
                continue
            # Deviation from straight-through: angle between a->v and v->b.
            dev = angular_distance(
                direction_degrees(out.vertices[a], out.vertices[v]),
                direction_degrees(out.vertices[v], out.vertices[b]))
            if dev >= tol_deg:
                continue
            new_edge = (min(a, b), max(a, b))
            if new_edge in out.edges:
                continue
            new_seg = Segment2(out.vertices[a], out.vertices[b])
            remaining = [e for e in out.edges if v not in e]
            if any(segments_properly_intersect(new_seg, Segment2(
                    out.vertices[e[0]], out.vertices[e[1]])) for e in remaining):
                continue
            out = PlanarGraph(
                {k: p for k, p in out.vertices.items() if k != v},
                remaining + [new_edge])
            merged = True
            break
        if not merged:
            return out


def extract_edge_confidence(emap: EdgeConfidenceMap, seg: Segment2,
                            width: float = 2.0) -> float:
    """Mean confidence over the width-2 rasterization of the segment."""
    canvas = (emap.width, emap.height)
    mask = rasterize_segment(seg, width, canvas)
    if not mask.any():
        raise OffCanvasError("segment rasterizes to no on-canvas pixels")
    return float(emap.values[mask].mean())
