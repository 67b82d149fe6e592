"""Builder translating detections into a linearized 0-1 maximization.

Variables: one binary per corner / candidate edge / region / active
direction bin, plus bounded continuous slacks introduced by softening.
Constraint families:

- topology_endpoint   edge on => each endpoint corner on (hard)
- topology_degree     corner on => at least 2 incident edges on (hard)
- topology_planarity  properly crossing candidate pair not both on (hard)
- region_noncross     edge crossing a region's interior excludes the region
- region_enclose      each outward boundary ray must see an active edge
- region_region       exactly one active edge crosses a shared boundary
- ce_bin              edges within an active direction bin sum to its flag
- ce_prune            edges pointing into low-confidence bins stay off

The non-topology families are softened: each constraint gains a capped
slack that relaxes it at a per-family objective penalty.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import (
    DegeneratePointsError,
    DegenerateTangentError,
    Point2,
    Segment2,
    bin_center,
    angular_distance,
    bin_direction,
    direction_degrees,
    distance,
    fit_line_segment,
    outward_normal,
    rasterize_segment,
    segment_hits_ray_batch,
    segments_properly_intersect,
    segments_touch,
    trace_boundary,
)
from .model import (
    DetectionSet,
    EdgeCandidate,
    FeatureConfig,
    extract_edge_confidence,
)

log = logging.getLogger(__name__)

KIND_CORNER = "cor"
KIND_EDGE = "edg"
KIND_REGION = "reg"
KIND_DIR = "dir"
KIND_SLACK_UP = "su"
KIND_SLACK_LO = "sl"

FAMILY_ENDPOINT = "topology_endpoint"
FAMILY_DEGREE = "topology_degree"
FAMILY_PLANARITY = "topology_planarity"
FAMILY_NONCROSS = "region_noncross"
FAMILY_ENCLOSE = "region_enclose"
FAMILY_RR = "region_region"
FAMILY_CE_BIN = "ce_bin"
FAMILY_CE_PRUNE = "ce_prune"

SOFT_FAMILIES = (FAMILY_NONCROSS, FAMILY_ENCLOSE, FAMILY_RR,
                 FAMILY_CE_BIN, FAMILY_CE_PRUNE)

DEFAULT_LAMBDAS = {
    FAMILY_NONCROSS: 0.5,
    FAMILY_ENCLOSE: 0.5,
    FAMILY_RR: 1.0,
    FAMILY_CE_BIN: 1.0,
    FAMILY_CE_PRUNE: 1.0,
}

LE = "<="
EQ = "="
GE = ">="


@dataclass(frozen=True)
class VarRef:
    kind: str
    key: tuple[int, ...]

    @property
    def name(self) -> str:
        if self.kind == KIND_CORNER:
            return f"c_{self.key[0]}"
        if self.kind == KIND_EDGE:
            return f"e_{self.key[0]}_{self.key[1]}"
        if self.kind == KIND_REGION:
            return f"r_{self.key[0]}"
        if self.kind == KIND_DIR:
            return f"d_{self.key[0]}_b{self.key[1]}"
        if self.kind == KIND_SLACK_UP:
            return f"su_{self.key[0]}"
        if self.kind == KIND_SLACK_LO:
            return f"sl_{self.key[0]}"
        raise ValueError(f"unknown kind {self.kind}")


def corner_ref(cid: int) -> VarRef:
    return VarRef(KIND_CORNER, (cid,))


def edge_ref(a: int, b: int) -> VarRef:
    return VarRef(KIND_EDGE, (min(a, b), max(a, b)))


def region_ref(rid: int) -> VarRef:
    return VarRef(KIND_REGION, (rid,))


def dir_ref(cid: int, b: int) -> VarRef:
    return VarRef(KIND_DIR, (cid, b))


@dataclass(frozen=True)
class Variable:
    ref: VarRef
    binary: bool
    lb: float
    ub: float


@dataclass
class LinearConstraint:
    terms: list[tuple[float, VarRef]]
    relation: str
    rhs: float
    family: str
    softened: bool = False

    def __post_init__(self):
        refs = [r for _, r in self.terms]
        if len(set(refs)) != len(refs):
            raise ValueError("duplicate variable in constraint")
        if self.relation not in (LE, EQ, GE):
            raise ValueError(f"bad relation {self.relation}")


@dataclass
class BinaryProgram:
    variables: list[Variable]
    constraints: list[LinearConstraint]
    objective: dict[VarRef, float]
    maximize: bool = True
    meta: dict = field(default_factory=dict)

    def index(self) -> dict[VarRef, int]:
        return {v.ref: i for i, v in enumerate(self.variables)}

    def binary_refs(self) -> list[VarRef]:
        return [v.ref for v in self.variables if v.binary]

    @property
    def n_binary(self) -> int:
        return sum(1 for v in self.variables if v.binary)

    def validate(self) -> None:
        idx = self.index()
        if len(idx) != len(self.variables):
            raise ValueError("duplicate variable declaration")
        for c in self.constraints:
            for _, r in c.terms:
                if r not in idx:
                    raise ValueError(f"constraint references undeclared {r.name}")
        for r in self.objective:
            if r not in idx:
                raise ValueError(f"objective references undeclared {r.name}")


@dataclass
class BuildParams:
    lambdas: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_LAMBDAS))
    slack_cap: float = 1.0
    edge_width: float = 2.0
    min_edge_length: float = 1.0
    interior_erosion_px: int = 2
    ray_length: float = 100.0
    ray_width: float = 2.0
    ray_step: int = 2
    empty_ray_fraction: float = 0.2
    ce_angle_tol_deg: float = 5.0
    bin_conf_threshold: float = 0.2
    beta_length: float = 16.0


@dataclass
class SoftenResult:
    constraints: list[LinearConstraint]
    variables: list[Variable]
    objective: dict[VarRef, float]


def soften(c: LinearConstraint, lam: float, slack_cap: float = 1.0,
           su_index: int = 0, sl_index: int = 0) -> SoftenResult:
    """Relax a constraint with capped slack at objective cost -lam per unit.

    Equalities split into an upper (<=, slack su) and a lower (>=, slack
    sl) constraint; a <= gains only su, a >= only sl.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    constraints: list[LinearConstraint] = []
    variables: list[Variable] = []
    objective: dict[VarRef, float] = {}

    def up() -> VarRef:
        ref = VarRef(KIND_SLACK_UP, (su_index,))
        variables.append(Variable(ref, binary=False, lb=0.0, ub=slack_cap))
        objective[ref] = -lam
        return ref

    def lo() -> VarRef:
        ref = VarRef(KIND_SLACK_LO, (sl_index,))
        variables.append(Variable(ref, binary=False, lb=0.0, ub=slack_cap))
        objective[ref] = -lam
        return ref

    if c.relation == LE:
        constraints.append(LinearConstraint(
            c.terms + [(-1.0, up())], LE, c.rhs, c.family, softened=True))
    elif c.relation == GE:
        constraints.append(LinearConstraint(
            c.terms + [(1.0, lo())], GE, c.rhs, c.family, softened=True))
    else:
        constraints.append(LinearConstraint(
            c.terms + [(-1.0, up())], LE, c.rhs, c.family, softened=True))
        constraints.append(LinearConstraint(
            c.terms + [(1.0, lo())], GE, c.rhs, c.family, softened=True))
    return SoftenResult(constraints, variables, objective)


def generate_candidates(d: DetectionSet,
                        params: BuildParams | None = None) -> list[EdgeCandidate]:
    """Every corner pair at least min_edge_length apart, scored on the map."""
    params = params or BuildParams()
    corners = sorted(d.corners, key=lambda c: c.id)
    cands: list[EdgeCandidate] = []
    for i in range(len(corners)):
        for j in range(i + 1, len(corners)):
            a, b = corners[i], corners[j]
            if distance(a.position, b.position) < params.min_edge_length:
                continue
            seg = Segment2(a.position, b.position)
            conf = extract_edge_confidence(d.edge_map, seg, params.edge_width)
            cands.append(EdgeCandidate(len(cands), a.id, b.id, conf))
    return cands


def build_objective(d: DetectionSet, candidates: list[EdgeCandidate],
                    cfg: FeatureConfig) -> dict[VarRef, float]:
    """Primitive and relationship reward terms (slack penalties excluded)."""
    conf = {c.id: c.confidence for c in d.corners}
    obj: dict[VarRef, float] = {}
    for cand in candidates:
        if cfg.use_corners:
            coef = (cand.confidence * conf[cand.corner_a] * conf[cand.corner_b]
                    - 0.5 ** 3)
        else:
            coef = cand.confidence - 0.5
        obj[edge_ref(cand.corner_a, cand.corner_b)] = coef
    if cfg.use_ce_relations:
        for c in sorted(d.corners, key=lambda c: c.id):
            for b, theta_conf in enumerate(c.direction_bins):
                if theta_conf >= 0.2:
                    obj[dir_ref(c.id, b)] = 0.1 * (
                        theta_conf * c.confidence - 0.5 ** 2)
    if cfg.use_regions:
        for r in sorted(d.regions, key=lambda r: r.id):
            obj[region_ref(r.id)] = 1.0
    return obj


def build_topology_constraints(
        d: DetectionSet,
        candidates: list[EdgeCandidate]) -> list[LinearConstraint]:
    """Hard endpoint, degree, and planarity constraints."""
    out: list[LinearConstraint] = []
    for cand in candidates:
        e = edge_ref(cand.corner_a, cand.corner_b)
        a, b = sorted((cand.corner_a, cand.corner_b))
        out.append(LinearConstraint(
            [(1.0, e), (-1.0, corner_ref(a))], LE, 0.0, FAMILY_ENDPOINT))
        out.append(LinearConstraint(
            [(1.0, e), (-1.0, corner_ref(b))], LE, 0.0, FAMILY_ENDPOINT))
    incident: dict[int, list[VarRef]] = {c.id: [] for c in d.corners}
    for cand in candidates:
        e = edge_ref(cand.corner_a, cand.corner_b)
        incident[cand.corner_a].append(e)
        incident[cand.corner_b].append(e)
    for cid in sorted(incident):
        terms = [(1.0, e) for e in incident[cid]]
        terms.append((-2.0, corner_ref(cid)))
        out.append(LinearConstraint(terms, GE, 0.0, FAMILY_DEGREE))
    pos = {c.id: c.position for c in d.corners}
    segs = [Segment2(pos[c.corner_a], pos[c.corner_b]) for c in candidates]
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            if segments_properly_intersect(segs[i], segs[j]):
                out.append(LinearConstraint(
                    [(1.0, edge_ref(candidates[i].corner_a,
                                    candidates[i].corner_b)),
                     (1.0, edge_ref(candidates[j].corner_a,
                                    candidates[j].corner_b))],
                    LE, 1.0, FAMILY_PLANARITY))
    return out


@dataclass
class RayProbe:
    region_id: int
    origin: Point2
    direction_deg: float
    hits: list[int]  # candidate ids


def build_region_constraints(
        d: DetectionSet, candidates: list[EdgeCandidate],
        params: BuildParams | None = None,
) -> tuple[list[LinearConstraint], list[RayProbe], list[str]]:
    """Interior non-crossing and boundary-ray enclosure constraints (unsoftened)."""
    from scipy import ndimage

    params = params or BuildParams()
    warnings: list[str] = []
    pos = {c.id: c.position for c in d.corners}
    cand_pixels = _candidate_pixels(d, candidates, params)
    ax = np.array([pos[c.corner_a].x for c in candidates])
    ay = np.array([pos[c.corner_a].y for c in candidates])
    bx = np.array([pos[c.corner_b].x for c in candidates])
    by = np.array([pos[c.corner_b].y for c in candidates])

    noncross: list[LinearConstraint] = []
    enclose: list[LinearConstraint] = []
    probes: list[RayProbe] = []
    for r in sorted(d.regions, key=lambda r: r.id):
        interior = ndimage.binary_erosion(
            r.mask, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]],
                                       dtype=bool),
            iterations=params.interior_erosion_px) \
            if params.interior_erosion_px > 0 else r.mask
        if interior.any():
            for cand in candidates:
                ys, xs = cand_pixels[cand.id]
                if interior[ys, xs].any():
                    noncross.append(LinearConstraint(
                        [(1.0, edge_ref(cand.corner_a, cand.corner_b)),
                         (1.0, region_ref(r.id))], LE, 1.0, FAMILY_NONCROSS))

        try:
            boundary = trace_boundary(r.mask)
        except Exception:
            warnings.append(f"region {r.id}: boundary tracing failed")
            continue
        ray_entries: list[tuple[Point2, float, list[int]]] = []
        degenerate = False
        for idx in range(0, len(boundary), params.ray_step):
            try:
                nx, ny = outward_normal(r.mask, boundary, idx)
            except DegenerateTangentError:
                degenerate = True
                break
            origin = Point2(float(boundary[idx][0]), float(boundary[idx][1]))
            theta = math.degrees(math.atan2(ny, nx)) % 360.0
            hit_mask = segment_hits_ray_batch(
                ax, ay, bx, by, origin, theta,
                params.ray_length, params.ray_width)
            hits = [candidates[k].id for k in np.nonzero(hit_mask)[0]]
            ray_entries.append((origin, theta, hits))
        if degenerate:
            warnings.append(
                f"region {r.id}: degenerate boundary, enclosure skipped")
            continue
        if not ray_entries:
            continue
        n_empty = sum(1 for _, _, hits in ray_entries if not hits)
        emit_empty = n_empty / len(ray_entries) >= params.empty_ray_fraction
        for origin, theta, hits in ray_entries:
            probes.append(RayProbe(r.id, origin, theta, list(hits)))
            if hits:
                terms = [(1.0, edge_ref(candidates[k].corner_a,
                                        candidates[k].corner_b))
                         for k in hits]
                terms.append((-1.0, region_ref(r.id)))
                enclose.append(LinearConstraint(
                    terms, GE, 0.0, FAMILY_ENCLOSE))
            elif emit_empty:
                enclose.append(LinearConstraint(
                    [(-1.0, region_ref(r.id))], GE, 0.0, FAMILY_ENCLOSE))
    return noncross + enclose, probes, warnings


def build_region_region_constraints(
        d: DetectionSet, candidates: list[EdgeCandidate],
        params: BuildParams | None = None,
) -> tuple[list[LinearConstraint], list[Segment2], list[str]]:
    """One exactly-one-edge constraint per shared-boundary instance."""
    params = params or BuildParams()
    warnings: list[str] = []
    betas: list[Segment2] = []
    out: list[LinearConstraint] = []
    pos = {c.id: c.position for c in d.corners}
    cand_segs = {c.id: Segment2(pos[c.corner_a], pos[c.corner_b])
                 for c in candidates}
    for b in sorted(d.rr_boundaries, key=lambda b: (b.region_a, b.region_b)):
        for k, mask in enumerate(b.masks):
            tag = f"boundary ({b.region_a},{b.region_b})[{k}]"
            ys, xs = np.nonzero(mask)
            pts = np.column_stack([xs, ys]).astype(float)
            try:
                fitted = fit_line_segment(pts)
            except DegeneratePointsError:
                warnings.append(f"{tag}: degenerate mask, constraint skipped")
                log.warning("%s: degenerate mask, constraint skipped", tag)
                continue
            ux = fitted.b.x - fitted.a.x
            uy = fitted.b.y - fitted.a.y
            norm = math.hypot(ux, uy)
            if norm < 1e-9:
                warnings.append(f"{tag}: zero-length fit, constraint skipped")
                log.warning("%s: zero-length fit, constraint skipped", tag)
                continue
            nx, ny = -uy / norm, ux / norm
            mid = fitted.midpoint
            half = params.beta_length / 2.0
            beta = Segment2(
                Point2(mid.x - half * nx, mid.y - half * ny),
                Point2(mid.x + half * nx, mid.y + half * ny))
            members = [c for c in candidates
                       if segments_touch(cand_segs[c.id], beta)]
            if not members:
                warnings.append(f"{tag}: no candidate crosses the probe, "
                                "constraint skipped")
                log.warning("%s: no candidate crosses the probe, "
                            "constraint skipped", tag)
                continue
            betas.append(beta)
            out.append(LinearConstraint(
                [(1.0, edge_ref(c.corner_a, c.corner_b)) for c in members],
                EQ, 1.0, FAMILY_RR))
    return out, betas, warnings


def build_ce_constraints(
        d: DetectionSet, candidates: list[EdgeCandidate],
        params: BuildParams | None = None,
) -> tuple[list[LinearConstraint], list[VarRef]]:
    """Direction-bin membership equalities and low-confidence pruning."""
    params = params or BuildParams()
    pos = {c.id: c.position for c in d.corners}
    incident: dict[int, list[EdgeCandidate]] = {c.id: [] for c in d.corners}
    for cand in candidates:
        incident[cand.corner_a].append(cand)
        incident[cand.corner_b].append(cand)

    bins_out: list[LinearConstraint] = []
    prune_out: list[LinearConstraint] = []
    dir_refs: list[VarRef] = []
    for c in sorted(d.corners, key=lambda c: c.id):
        directions: dict[int, float] = {}
        for cand in incident[c.id]:
            other = cand.corner_b if cand.corner_a == c.id else cand.corner_a
            directions[cand.id] = direction_degrees(pos[c.id], pos[other])
        for b, theta_conf in enumerate(c.direction_bins):
            if theta_conf < params.bin_conf_threshold:
                continue
            ref = dir_ref(c.id, b)
            dir_refs.append(ref)
            center = bin_center(b)
            members = [cand for cand in incident[c.id]
                       if angular_distance(directions[cand.id], center)
                       <= params.ce_angle_tol_deg]
            terms = [(1.0, edge_ref(cand.corner_a, cand.corner_b))
                     for cand in members]
            terms.append((-1.0, ref))
            bins_out.append(LinearConstraint(terms, EQ, 0.0, FAMILY_CE_BIN))
        pruned = [cand for cand in incident[c.id]
                  if c.direction_bins[bin_direction(directions[cand.id])]
                  < params.bin_conf_threshold]
        if pruned:
            prune_out.append(LinearConstraint(
                [(1.0, edge_ref(cand.corner_a, cand.corner_b))
                 for cand in pruned],
                EQ, 0.0, FAMILY_CE_PRUNE))
    return bins_out + prune_out, dir_refs


def build(d: DetectionSet, cfg: FeatureConfig,
          params: BuildParams | None = None) -> BinaryProgram:
    """Assemble the full program for one building.

    Deterministic: variables are ordered corners, edges, regions,
    direction bins, then slacks in softening order; constraints are ordered
    by family as documented in the module docstring.
    """
    params = params or BuildParams()
    d.validate()
    candidates = generate_candidates(d, params)

    variables: list[Variable] = []
    if cfg.use_corners:
        for c in sorted(d.corners, key=lambda c: c.id):
            variables.append(Variable(corner_ref(c.id), True, 0.0, 1.0))
    for cand in candidates:
        variables.append(Variable(
            edge_ref(cand.corner_a, cand.corner_b), True, 0.0, 1.0))
    if cfg.use_regions:
        for r in sorted(d.regions, key=lambda r: r.id):
            variables.append(Variable(region_ref(r.id), True, 0.0, 1.0))

    objective = build_objective(d, candidates, cfg)

    hard: list[LinearConstraint] = []
    soft: list[LinearConstraint] = []
    meta: dict = {"candidates": candidates, "warnings": []}

    if cfg.use_corners:
        hard.extend(build_topology_constraints(d, candidates))
    if cfg.use_regions:
        rc, probes, warns = build_region_constraints(d, candidates, params)
        soft.extend(rc)
        meta["rays"] = probes
        meta["warnings"].extend(warns)
    if cfg.use_rr_relations:
        rr, betas, warns = build_region_region_constraints(
            d, candidates, params)
        soft.extend(rr)
        meta["betas"] = betas
        meta["warnings"].extend(warns)
    if cfg.use_ce_relations:
        ce, dir_refs = build_ce_constraints(d, candidates, params)
        soft.extend(ce)
        for ref in dir_refs:
            variables.append(Variable(ref, True, 0.0, 1.0))

    constraints: list[LinearConstraint] = list(hard)
    n_su = n_sl = 0
    for c in soft:
        lam = params.lambdas.get(c.family, 1.0)
        res = soften(c, lam, params.slack_cap, su_index=n_su, sl_index=n_sl)
        constraints.extend(res.constraints)
        variables.extend(res.variables)
        objective.update(res.objective)  # slack refs are fresh by construction
        n_su += sum(1 for v in res.variables if v.ref.kind == KIND_SLACK_UP)
        n_sl += sum(1 for v in res.variables if v.ref.kind == KIND_SLACK_LO)
    program = BinaryProgram(variables, constraints, objective, True, meta)
    program.validate()
    return program


def _candidate_pixels(d: DetectionSet, candidates: list[EdgeCandidate],
                      params: BuildParams) -> dict[int, tuple[np.ndarray,
                                                              np.ndarray]]:
    pos = {c.id: c.position for c in d.corners}
    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for cand in candidates:
        seg = Segment2(pos[cand.corner_a], pos[cand.corner_b])
        mask = rasterize_segment(seg, params.edge_width, d.canvas)
        ys, xs = np.nonzero(mask)
        out[cand.id] = (ys, xs)
    return out
