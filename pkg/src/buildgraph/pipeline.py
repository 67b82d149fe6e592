"""End-to-end assembly: detections -> program -> solve -> valid graph.

The optimizer's raw selection can violate planar-graph invariants in ways
the program never penalizes (sub-pixel vertex pairs from spurious corners,
crossings surviving a soft or disabled planarity family, degree-1 stubs in
edges-only mode), so the selected primitives pass through a deterministic
sanitizer — deduplicate, merge near-coincident vertices, drop
lowest-value/longest crossing edges, keep the 2-core — before the optional
collinear-vertex merge.  The result always satisfies PlanarGraph.validate.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geom import Point2, Segment2, distance, segments_properly_intersect
from .ipbuild import (
    FAMILY_DEGREE,
    FAMILY_ENDPOINT,
    FAMILY_PLANARITY,
    KIND_CORNER,
    KIND_EDGE,
    BinaryProgram,
    BuildParams,
    VarRef,
    build,
)
from .model import (
    DetectionSet,
    FeatureConfig,
    PlanarGraph,
    merge_colinear_corners,
)
from .solver import (
    STATUS_OPTIMAL,
    FeasibilityReport,
    SolveResult,
    check_feasible,
    solve,
)

HARD_FAMILIES = frozenset({FAMILY_ENDPOINT, FAMILY_DEGREE, FAMILY_PLANARITY})

MERGE_DISTANCE_PX = 1.0


@dataclass
class AssemblyResult:
    graph: PlanarGraph
    program: BinaryProgram
    solve_result: SolveResult
    raw_vertices: dict[int, Point2]
    raw_edges: list[tuple[int, int]]
    hard_feasibility: FeasibilityReport | None

    @property
    def status(self) -> str:
        return self.solve_result.status


def selection_from_assignment(
        d: DetectionSet,
        assignment: dict[VarRef, float],
) -> tuple[dict[int, Point2], list[tuple[int, int]]]:
    """Active corners and edges of a solved assignment.

    Corner variables exist only when the corner feature is on; otherwise
    the vertex set is implied by the selected edges' endpoints.
    """
    pos = {c.id: c.position for c in d.corners}
    vertices: dict[int, Point2] = {}
    edges: list[tuple[int, int]] = []
    for ref, val in assignment.items():
        if val <= 0.5:
            continue
        if ref.kind == KIND_CORNER:
            vertices[ref.key[0]] = pos[ref.key[0]]
        elif ref.kind == KIND_EDGE:
            a, b = ref.key
            edges.append((a, b))
            vertices.setdefault(a, pos[a])
            vertices.setdefault(b, pos[b])
    return vertices, sorted(edges)


def sanitize_graph(vertices: dict[int, Point2],
                   edges: list[tuple[int, int]],
                   edge_value: dict[tuple[int, int], float] | None = None,
                   ) -> PlanarGraph:
    """Deterministically repair a raw selection into a valid graph."""
    edge_value = dict(edge_value or {})
    verts = dict(vertices)
    eset: list[tuple[int, int]] = sorted(
        {(min(a, b), max(a, b)) for a, b in edges if a != b})

    # Merge vertices closer than MERGE_DISTANCE_PX into the smaller id.
    changed = True
    while changed:
        changed = False
        ids = sorted(verts)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                a, b = ids[i], ids[j]
                if distance(verts[a], verts[b]) < MERGE_DISTANCE_PX:
                    remapped = set()
                    for u, v in eset:
                        u2 = a if u == b else u
                        v2 = a if v == b else v
                        if u2 == v2:
                            continue
                        e2 = (min(u2, v2), max(u2, v2))
                        old = (min(u, v), max(u, v))
                        if old in edge_value:
                            edge_value[e2] = max(
                                edge_value.get(e2, float("-inf")),
                                edge_value[old])
                        remapped.add(e2)
                    eset = sorted(remapped)
                    del verts[b]
                    changed = True
                    break
            if changed:
                break

    # Drop crossing edges: lowest value first, longer first on ties.
    def seg(e: tuple[int, int]) -> Segment2:
        return Segment2(verts[e[0]], verts[e[1]])

    while True:
        crossing: set[tuple[int, int]] = set()
        for i in range(len(eset)):
            for j in range(i + 1, len(eset)):
                if segments_properly_intersect(seg(eset[i]), seg(eset[j])):
                    crossing.add(eset[i])
                    crossing.add(eset[j])
        if not crossing:
            break
        drop = min(crossing,
                   key=lambda e: (edge_value.get(e, 0.0),
                                  -seg(e).length, e))
        eset = [e for e in eset if e != drop]

    # Keep the 2-core: repeatedly strip vertices of degree < 2.
    while True:
        deg: dict[int, int] = {v: 0 for v in verts}
        for a, b in eset:
            deg[a] += 1
            deg[b] += 1
        weak = {v for v, k in deg.items() if k < 2}
        if not weak:
            break
        verts = {v: p for v, p in verts.items() if v not in weak}
        eset = [(a, b) for a, b in eset if a not in weak and b not in weak]

    return PlanarGraph(vertices=verts, edges=eset)


def assemble(d: DetectionSet, cfg: FeatureConfig,
             params: BuildParams | None = None,
             time_limit: float | None = None,
             post: bool = True,
             canvas_check: bool = True) -> AssemblyResult:
    """Build the program, solve it, and return a valid assembled graph."""
    params = params or BuildParams()
    program = build(d, cfg, params)
    result = solve(program, time_limit=time_limit)

    if result.assignment is None:
        graph = PlanarGraph(vertices={}, edges=[])
        return AssemblyResult(graph, program, result, {}, [], None)

    feas = check_feasible(program, result.assignment,
                          families=set(HARD_FAMILIES))
    raw_vertices, raw_edges = selection_from_assignment(d, result.assignment)
    edge_value = {ref.key: coef for ref, coef in program.objective.items()
                  if ref.kind == KIND_EDGE}
    graph = sanitize_graph(raw_vertices, raw_edges, edge_value)
    if post:
        graph = merge_colinear_corners(graph)
    graph.validate(d.canvas if canvas_check else None)
    return AssemblyResult(graph, program, result, raw_vertices, raw_edges,
                          feas)
