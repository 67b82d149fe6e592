"""Corner / edge / region precision-recall scoring for planar graphs.

Corners match greedily by ascending distance with an inclusive 8 px
tolerance; an edge is correct when both endpoints matched and the matched
ground-truth vertices are joined by a ground-truth edge (each of which
credits at most one prediction); regions are rasterized bounded faces
matched greedily by descending IOU with a strict 0.7 threshold.  Scores
aggregate by summing counts over the dataset (micro-averaging).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geom import distance
from .model import DEFAULT_CANVAS, PlanarGraph, enumerate_faces

CORNER_TOLERANCE_PX = 8.0
REGION_IOU_THRESHOLD = 0.7


class LengthMismatchError(ValueError):
    """Prediction and ground-truth lists differ in length."""


@dataclass
class LevelScore:
    """Counts and derived rates for one primitive level."""

    tp: int = 0
    n_pred: int = 0
    n_gt: int = 0

    @property
    def precision(self) -> float:
        return self.tp / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.n_gt if self.n_gt else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) > 0 else 0.0

    def add(self, other: "LevelScore") -> None:
        self.tp += other.tp
        self.n_pred += other.n_pred
        self.n_gt += other.n_gt


def _score100(x: float) -> float:
    return round(x * 100.0, 1)


@dataclass
class MetricsReport:
    corner: LevelScore = field(default_factory=LevelScore)
    edge: LevelScore = field(default_factory=LevelScore)
    region: LevelScore = field(default_factory=LevelScore)

    def scores(self) -> dict[str, float]:
        """The nine scores x100 rounded to one decimal, in table order."""
        out: dict[str, float] = {}
        for name, level in (("corner", self.corner), ("edge", self.edge),
                            ("region", self.region)):
            out[f"{name}_precision"] = _score100(level.precision)
            out[f"{name}_recall"] = _score100(level.recall)
            out[f"{name}_f1"] = _score100(level.f1)
        return out

    def to_dict(self) -> dict:
        d: dict = {}
        for name, level in (("corner", self.corner), ("edge", self.edge),
                            ("region", self.region)):
            d[name] = {
                "precision": _score100(level.precision),
                "recall": _score100(level.recall),
                "f1": _score100(level.f1),
                "tp": level.tp,
                "n_pred": level.n_pred,
                "n_gt": level.n_gt,
            }
        return d


def match_corners(pred: PlanarGraph, gt: PlanarGraph,
                  tol: float = CORNER_TOLERANCE_PX) -> dict[int, int]:
    """Greedy one-to-one vertex matching: pred id -> gt id.

    Candidate pairs within the (inclusive) tolerance are taken in
    ascending (distance, pred id, gt id) order.
    """
    pairs = []
    for pid, pp in pred.vertices.items():
        for gid, gp in gt.vertices.items():
            d = distance(pp, gp)
            if d <= tol:
                pairs.append((d, pid, gid))
    pairs.sort()
    matching: dict[int, int] = {}
    used_gt: set[int] = set()
    for _, pid, gid in pairs:
        if pid in matching or gid in used_gt:
            continue
        matching[pid] = gid
        used_gt.add(gid)
    return matching


def score_corners(pred: PlanarGraph, gt: PlanarGraph,
                  tol: float = CORNER_TOLERANCE_PX) -> LevelScore:
    matching = match_corners(pred, gt, tol)
    return LevelScore(tp=len(matching), n_pred=len(pred.vertices),
                      n_gt=len(gt.vertices))


def score_edges(pred: PlanarGraph, gt: PlanarGraph,
                matching: dict[int, int]) -> int:
    """Edge true-positive count under a corner matching.

    A predicted edge scores when both endpoints are matched and their
    images are joined by a ground-truth edge; every ground-truth edge
    credits at most one prediction.
    """
    gt_edges = set(gt.edges)
    credited: set[tuple[int, int]] = set()
    tp = 0
    for u, v in pred.edges:
        gu, gv = matching.get(u), matching.get(v)
        if gu is None or gv is None:
            continue
        ge = (min(gu, gv), max(gu, gv))
        if ge in gt_edges and ge not in credited:
            credited.add(ge)
            tp += 1
    return tp


def score_regions(pred: PlanarGraph, gt: PlanarGraph,
                  canvas: tuple[int, int] = DEFAULT_CANVAS,
                  iou_threshold: float = REGION_IOU_THRESHOLD) -> LevelScore:
    """Face-level scores: greedy descending-IOU matching, strict threshold."""
    pred_faces = enumerate_faces(pred, canvas, validate=False)
    gt_faces = enumerate_faces(gt, canvas, validate=False)
    pairs = []
    for i, pf in enumerate(pred_faces):
        for j, gf in enumerate(gt_faces):
            inter = int(np.count_nonzero(pf.mask & gf.mask))
            if inter == 0:
                continue
            union = int(np.count_nonzero(pf.mask | gf.mask))
            iou = inter / union if union else 0.0
            pairs.append((-iou, i, j))
    pairs.sort()
    used_p: set[int] = set()
    used_g: set[int] = set()
    tp = 0
    for neg_iou, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        if -neg_iou > iou_threshold:
            tp += 1
    return LevelScore(tp=tp, n_pred=len(pred_faces), n_gt=len(gt_faces))


def evaluate_pair(pred: PlanarGraph, gt: PlanarGraph,
                  canvas: tuple[int, int] = DEFAULT_CANVAS) -> MetricsReport:
    """Score a single prediction against its ground truth."""
    report = MetricsReport()
    matching = match_corners(pred, gt)
    report.corner = LevelScore(tp=len(matching), n_pred=len(pred.vertices),
                               n_gt=len(gt.vertices))
    report.edge = LevelScore(tp=score_edges(pred, gt, matching),
                             n_pred=len(pred.edges), n_gt=len(gt.edges))
    report.region = score_regions(pred, gt, canvas)
    return report


def evaluate(preds, gts,
             canvas: tuple[int, int] = DEFAULT_CANVAS) -> MetricsReport:
    """Micro-averaged scores over aligned prediction / ground-truth lists.

    Single graphs are also accepted and treated as one-element lists.
    """
    if isinstance(preds, PlanarGraph):
        preds = [preds]
    if isinstance(gts, PlanarGraph):
        gts = [gts]
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts):
        raise LengthMismatchError(
            f"{len(preds)} predictions vs {len(gts)} ground truths")
    total = MetricsReport()
    for p, g in zip(preds, gts):
        r = evaluate_pair(p, g, canvas)
        total.corner.add(r.corner)
        total.edge.add(r.edge)
        total.region.add(r.region)
    return total
