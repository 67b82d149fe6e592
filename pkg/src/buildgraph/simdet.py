"""Detector surrogate: noisy synthetic detections from ground-truth graphs.

Produces the same kind of output a trained detector stack would — corners
with confidences and per-bin direction scores, a pixel-wise edge confidence
map, region masks, and region-pair boundary masks — with controllable,
fully seeded noise, so the assembly pipeline can be tested end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .geom import (
    Point2,
    Segment2,
    bin_direction,
    direction_degrees,
    rasterize_segment,
)
from .model import (
    N_DIRECTION_BINS,
    CornerDetection,
    DetectionSet,
    EdgeConfidenceMap,
    PlanarGraph,
    RegionDetection,
    RegionPairBoundary,
    enumerate_faces,
)

# RNG stream tags: one sub-stream per noise source so adding entities never
# reshuffles the draws of existing ones.
_S_JITTER = 0
_S_CONF = 1
_S_DROP = 2
_S_SPURIOUS = 3
_S_EDGE_NOISE = 4
_S_RR_DROP = 5

_ERODE_STRUCTURE = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class GraphOffCanvasError(ValueError):
    """Ground-truth graph has vertices outside the canvas."""


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    corner_jitter_sigma: float = 1.0
    corner_drop_rate: float = 0.0
    spurious_corner_rate: float = 0.0
    true_corner_conf_range: tuple[float, float] = (0.8, 1.0)
    false_corner_conf_range: tuple[float, float] = (0.2, 0.5)
    edge_map_fg: float = 0.9
    edge_map_bg: float = 0.05
    edge_map_noise_sigma: float = 0.05
    dir_bin_true_conf: float = 0.9
    dir_bin_false_conf: float = 0.05
    region_erode_px: int = 0
    rr_boundary_drop_rate: float = 0.0

    def __post_init__(self):
        for lo, hi in (self.true_corner_conf_range,
                       self.false_corner_conf_range):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError("confidence ranges must be within [0,1]")
        if self.true_corner_conf_range[0] < 0.2:
            raise ValueError("true corner confidences must stay above the "
                             "0.2 detection threshold")
        for v in (self.corner_drop_rate, self.spurious_corner_rate,
                  self.edge_map_fg, self.edge_map_bg,
                  self.dir_bin_true_conf, self.dir_bin_false_conf,
                  self.rr_boundary_drop_rate):
            if v < 0.0:
                raise ValueError("noise parameters must be non-negative")
        if self.corner_jitter_sigma < 0 or self.edge_map_noise_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        if self.region_erode_px < 0:
            raise ValueError("region_erode_px must be non-negative")

    @classmethod
    def clean(cls, seed: int = 0) -> "NoiseConfig":
        """Zero-noise configuration: detections reproduce GT exactly."""
        return cls(
            seed=seed,
            corner_jitter_sigma=0.0,
            corner_drop_rate=0.0,
            spurious_corner_rate=0.0,
            true_corner_conf_range=(1.0, 1.0),
            false_corner_conf_range=(0.2, 0.5),
            edge_map_fg=1.0,
            edge_map_bg=0.0,
            edge_map_noise_sigma=0.0,
            dir_bin_true_conf=1.0,
            dir_bin_false_conf=0.0,
            region_erode_px=0,
            rr_boundary_drop_rate=0.0,
        )

    def with_seed(self, seed: int) -> "NoiseConfig":
        return replace(self, seed=seed)


def _rng(cfg: NoiseConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *key])


def simulate(gt: PlanarGraph, cfg: NoiseConfig,
             canvas: tuple[int, int] = (256, 256)) -> DetectionSet:
    """Generate a noisy DetectionSet for a ground-truth graph.

    Deterministic given (gt, cfg, canvas): every noise source draws from
    its own counter-based RNG stream keyed by (seed, stream, entity id).
    """
    w, h = canvas
    for vid, p in gt.vertices.items():
        if not (0.0 <= p.x <= w - 1 and 0.0 <= p.y <= h - 1):
            raise GraphOffCanvasError(f"vertex {vid} at ({p.x},{p.y}) off canvas")
    gt.validate()

    # Jitter every vertex first (dropped corners still contribute direction
    # evidence at their neighbors), then decide drops.
    jittered: dict[int, tuple[float, float]] = {}
    for vid in sorted(gt.vertices):
        p = gt.vertices[vid]
        if cfg.corner_jitter_sigma > 0:
            dx, dy = _rng(cfg, _S_JITTER, vid).normal(
                0.0, cfg.corner_jitter_sigma, 2)
        else:
            dx = dy = 0.0
        x = float(np.clip(p.x + dx, 2.0, w - 3.0))
        y = float(np.clip(p.y + dy, 2.0, h - 3.0))
        jittered[vid] = (x, y)

    kept: list[int] = []
    for vid in sorted(gt.vertices):
        if cfg.corner_drop_rate > 0 and _rng(cfg, _S_DROP, vid).uniform() \
                < cfg.corner_drop_rate:
            continue
        kept.append(vid)

    adj = gt.neighbors()
    corners: list[CornerDetection] = []
    for vid in kept:
        x, y = jittered[vid]
        lo, hi = cfg.true_corner_conf_range
        conf = float(_rng(cfg, _S_CONF, vid).uniform(lo, hi))
        bins = np.full(N_DIRECTION_BINS, cfg.dir_bin_false_conf, dtype=float)
        for nb in adj[vid]:
            nx, ny = jittered[nb]
            theta = direction_degrees(Point2(x, y), Point2(nx, ny))
            bins[bin_direction(theta)] = cfg.dir_bin_true_conf
        corners.append(CornerDetection(
            id=vid, position=Point2(x, y), confidence=conf,
            direction_bins=tuple(float(b) for b in bins)))

    # Spurious corners: Poisson count, uniform positions, low confidence,
    # structureless direction bins (all at the false level).
    rng_sp = _rng(cfg, _S_SPURIOUS)
    n_spurious = int(rng_sp.poisson(cfg.spurious_corner_rate)) \
        if cfg.spurious_corner_rate > 0 else 0
    next_id = max(gt.vertices, default=-1) + 1
    flo, fhi = cfg.false_corner_conf_range
    for k in range(n_spurious):
        x = float(rng_sp.uniform(2.0, w - 3.0))
        y = float(rng_sp.uniform(2.0, h - 3.0))
        conf = float(rng_sp.uniform(max(flo, 0.2), max(fhi, 0.2)))
        corners.append(CornerDetection(
            id=next_id + k, position=Point2(x, y), confidence=conf,
            direction_bins=tuple([cfg.dir_bin_false_conf] * N_DIRECTION_BINS)))

    # Edge confidence map: foreground strips along true edges over a low
    # background, plus clamped Gaussian pixel noise.
    emap = np.full((h, w), cfg.edge_map_bg, dtype=np.float64)
    for a, b in gt.edges:
        seg = Segment2(gt.vertices[a], gt.vertices[b])
        emap[rasterize_segment(seg, 2.0, canvas)] = cfg.edge_map_fg
    if cfg.edge_map_noise_sigma > 0:
        noise = _rng(cfg, _S_EDGE_NOISE).normal(
            0.0, cfg.edge_map_noise_sigma, (h, w))
        emap = emap + noise
    emap = np.clip(emap, 0.0, 1.0)

    # Regions: rasterized bounded faces, optionally eroded.
    faces = enumerate_faces(gt, canvas, validate=False)
    regions: list[RegionDetection] = []
    region_face_index: list[int] = []
    for i, face in enumerate(faces):
        mask = face.mask
        if cfg.region_erode_px > 0:
            mask = ndimage.binary_erosion(
                mask, structure=_ERODE_STRUCTURE,
                iterations=cfg.region_erode_px)
        if not mask.any():
            continue
        regions.append(RegionDetection(id=i, mask=mask, confidence=1.0))
        region_face_index.append(i)

    # Region-pair boundaries: one width-2 mask per GT edge shared by two
    # faces, each instance independently droppable.
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for i, face in enumerate(faces):
        cyc = face.cycle
        for j in range(len(cyc)):
            e = (min(cyc[j], cyc[(j + 1) % len(cyc)]),
                 max(cyc[j], cyc[(j + 1) % len(cyc)]))
            edge_faces.setdefault(e, []).append(i)
    present = set(region_face_index)
    pair_edges: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for e, fids in sorted(edge_faces.items()):
        fids = sorted(set(fids))
        if len(fids) == 2 and fids[0] in present and fids[1] in present:
            pair_edges.setdefault((fids[0], fids[1]), []).append(e)
    rr_boundaries: list[RegionPairBoundary] = []
    for (fa, fb), shared in sorted(pair_edges.items()):
        masks: list[np.ndarray] = []
        for k, e in enumerate(shared):
            if cfg.rr_boundary_drop_rate > 0 and _rng(
                    cfg, _S_RR_DROP, fa, fb, k).uniform() \
                    < cfg.rr_boundary_drop_rate:
                continue
            seg = Segment2(gt.vertices[e[0]], gt.vertices[e[1]])
            masks.append(rasterize_segment(seg, 2.0, canvas))
        if masks:
            rr_boundaries.append(RegionPairBoundary(fa, fb, masks))

    det = DetectionSet(
        canvas=canvas,
        corners=corners,
        edge_map=EdgeConfidenceMap(emap),
        regions=regions,
        rr_boundaries=rr_boundaries,
    )
    det.validate()
    return det
