"""JSON file formats: detection sets, graphs, and RLE mask codecs.

Masks serialize as run-length-encoded rows of alternating run lengths
starting with a background run (which may be 0); runs sum exactly to the
row width.  The edge confidence map uses the same row structure with
quantized value codes — a parallel "values" array carries one code per
foreground run and is omitted entirely for binary maps, where foreground
decodes to 1.0.  Writers emit canonical compact JSON so that
write-read-write round trips are byte-stable.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .geom import Point2
from .model import (
    CornerDetection,
    DetectionSet,
    EdgeConfidenceMap,
    N_DIRECTION_BINS,
    PlanarGraph,
    RegionDetection,
    RegionPairBoundary,
)

VALUE_SCALE = 65535.0


class FormatError(ValueError):
    """Malformed or invariant-violating input file."""


def dumps_canonical(obj) -> str:
    """Compact, key-order-preserving JSON with a trailing newline."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# RLE codecs.


def encode_mask(mask: np.ndarray) -> dict:
    """Binary mask -> {"width", "height", "rows"} with alternating runs."""
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    rows = []
    for y in range(h):
        row = m[y]
        change = np.flatnonzero(row[1:] != row[:-1]) + 1
        bounds = [0, *change.tolist(), w]
        runs = [bounds[i + 1] - bounds[i] for i in range(len(bounds) - 1)]
        if w and row[0]:
            runs = [0, *runs]
        rows.append(runs if w else [0])
    return {"width": w, "height": h, "rows": rows}


def decode_mask(obj) -> np.ndarray:
    try:
        w = int(obj["width"])
        h = int(obj["height"])
        rows = obj["rows"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad mask object: {exc}") from exc
    if w < 0 or h < 0 or not isinstance(rows, list) or len(rows) != h:
        raise FormatError("mask row count does not match height")
    out = np.zeros((h, w), dtype=bool)
    for y, runs in enumerate(rows):
        x = 0
        fg = False
        for run in runs:
            if not isinstance(run, int) or run < 0:
                raise FormatError(f"bad run length {run!r} in mask row {y}")
            if fg:
                out[y, x:x + run] = True
            x += run
            fg = not fg
        if x != w and not (w == 0 and runs == [0]):
            raise FormatError(f"mask row {y} decodes to {x} px, want {w}")
    return out


def encode_edge_map(emap: EdgeConfidenceMap) -> dict:
    """Edge confidence map -> rle-rows object with quantized value codes."""
    vals = np.asarray(emap.values, dtype=float)
    h, w = vals.shape
    codes = np.rint(np.clip(vals, 0.0, 1.0) * VALUE_SCALE).astype(np.int64)
    rows: list[list[int]] = []
    value_rows: list[list[int]] = []
    binary = True
    for y in range(h):
        runs: list[int] = []
        fg_codes: list[int] = []
        expect_fg = False
        x = 0
        row = codes[y]
        change = np.flatnonzero(row[1:] != row[:-1]) + 1
        bounds = [0, *change.tolist(), w]
        for i in range(len(bounds) - 1):
            ln = bounds[i + 1] - bounds[i]
            code = int(row[bounds[i]]) if ln else 0
            if code == 0:
                if expect_fg:
                    raise AssertionError("adjacent zero runs")
                runs.append(ln)
            else:
                if not expect_fg:
                    runs.append(0)
                    expect_fg = True
                runs.append(ln)
                fg_codes.append(code)
                if code != int(VALUE_SCALE):
                    binary = False
            expect_fg = not expect_fg
            x += ln
        if not runs:
            runs = [w]
        rows.append(runs)
        value_rows.append(fg_codes)
    obj = {"width": w, "height": h, "encoding": "rle-rows", "rows": rows,
           "scale": VALUE_SCALE}
    if not binary:
        obj["values"] = value_rows
    return obj


def decode_edge_map(obj) -> EdgeConfidenceMap:
    try:
        w = int(obj["width"])
        h = int(obj["height"])
        encoding = obj["encoding"]
        rows = obj["rows"]
        scale = float(obj["scale"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad edge_map object: {exc}") from exc
    if encoding != "rle-rows":
        raise FormatError(f"unknown edge_map encoding {encoding!r}")
    if scale <= 0 or not math.isfinite(scale):
        raise FormatError(f"bad edge_map scale {scale}")
    if not isinstance(rows, list) or len(rows) != h:
        raise FormatError("edge_map row count does not match height")
    value_rows = obj.get("values")
    if value_rows is not None and (not isinstance(value_rows, list)
                                   or len(value_rows) != h):
        raise FormatError("edge_map values row count does not match height")
    out = np.zeros((h, w), dtype=np.float64)
    for y, runs in enumerate(rows):
        vrow = value_rows[y] if value_rows is not None else None
        x = 0
        fg = False
        k = 0
        for run in runs:
            if not isinstance(run, int) or run < 0:
                raise FormatError(
                    f"bad run length {run!r} in edge_map row {y}")
            if fg and run:
                if vrow is None:
                    code = scale
                else:
                    if k >= len(vrow):
                        raise FormatError(
                            f"edge_map row {y} lacks a value for run {k}")
                    code = float(vrow[k])
                    if not (0 < code <= scale):
                        raise FormatError(
                            f"edge_map value code {code} out of range")
                out[y, x:x + run] = code / scale
            if fg:
                k += 1
            x += run
            fg = not fg
        if x != w and not (w == 0 and runs == [0]):
            raise FormatError(f"edge_map row {y} decodes to {x} px, want {w}")
        if vrow is not None and k != len(vrow):
            raise FormatError(f"edge_map row {y} has {len(vrow)} values "
                              f"for {k} foreground runs")
    return EdgeConfidenceMap(values=out)


# ---------------------------------------------------------------------------
# Detection sets.


def detections_to_obj(d: DetectionSet) -> dict:
    corners = [{"id": c.id, "x": float(c.position.x), "y": float(c.position.y),
                "conf": float(c.confidence),
                "bins": [float(b) for b in c.direction_bins]}
               for c in d.corners]
    regions = [{"id": r.id, "conf": float(r.confidence),
                "mask": encode_mask(r.mask)} for r in d.regions]
    rr = [{"a": b.region_a, "b": b.region_b,
           "masks": [encode_mask(m) for m in b.masks]}
          for b in d.rr_boundaries]
    return {"canvas": [int(d.canvas[0]), int(d.canvas[1])],
            "corners": corners,
            "edge_map": encode_edge_map(d.edge_map),
            "regions": regions,
            "rr_boundaries": rr}


def detections_from_obj(obj) -> DetectionSet:
    try:
        canvas = (int(obj["canvas"][0]), int(obj["canvas"][1]))
        corners = [
            CornerDetection(id=int(c["id"]),
                            position=Point2(float(c["x"]), float(c["y"])),
                            confidence=float(c["conf"]),
                            direction_bins=tuple(float(b)
                                                 for b in c["bins"]))
            for c in obj["corners"]
        ]
        emap = decode_edge_map(obj["edge_map"])
        regions = [RegionDetection(id=int(r["id"]),
                                   mask=decode_mask(r["mask"]),
                                   confidence=float(r["conf"]))
                   for r in obj["regions"]]
        rr = [RegionPairBoundary(region_a=int(b["a"]), region_b=int(b["b"]),
                                 masks=[decode_mask(m) for m in b["masks"]])
              for b in obj["rr_boundaries"]]
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"malformed detection file: {exc}") from exc
    for c in corners:
        if len(c.direction_bins) != N_DIRECTION_BINS:
            raise FormatError(
                f"corner {c.id} has {len(c.direction_bins)} direction bins")
    det = DetectionSet(canvas=canvas, corners=corners, edge_map=emap,
                       regions=regions, rr_boundaries=rr)
    try:
        det.validate()
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    return det


def save_detections(d: DetectionSet, path) -> None:
    Path(path).write_text(dumps_canonical(detections_to_obj(d)))


def load_detections(path) -> DetectionSet:
    return detections_from_obj(_read_json(path))


# ---------------------------------------------------------------------------
# Graphs.


def graph_to_obj(g: PlanarGraph) -> dict:
    vertices = [{"id": vid, "x": float(p.x), "y": float(p.y)}
                for vid, p in sorted(g.vertices.items())]
    return {"vertices": vertices,
            "edges": [[a, b] for a, b in g.edges]}


def graph_from_obj(obj, canvas: tuple[int, int] | None = None,
                   strict: bool = True) -> PlanarGraph:
    try:
        vertices = {int(v["id"]): Point2(float(v["x"]), float(v["y"]))
                    for v in obj["vertices"]}
        if len(vertices) != len(obj["vertices"]):
            raise FormatError("duplicate vertex id")
        edges = [(int(a), int(b)) for a, b in obj["edges"]]
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed graph file: {exc}") from exc
    g = PlanarGraph(vertices=vertices, edges=edges)
    if strict:
        try:
            g.validate(canvas)
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
    return g


def save_graph(g: PlanarGraph, path) -> None:
    Path(path).write_text(dumps_canonical(graph_to_obj(g)))


def load_graph(path, canvas: tuple[int, int] | None = None,
               strict: bool = True) -> PlanarGraph:
    return graph_from_obj(_read_json(path), canvas, strict)


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON in {path}: {exc}") from exc
