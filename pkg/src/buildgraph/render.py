"""SVG rendering of graphs, detections, and builder probe geometry.

Graphs render as black vertex circles (radius 3) over edge lines.
Detection sets render corner markers plus one translucent ``<g
class="region">`` group per region mask; with debug enabled, the
enclosure-probe rays and the region-pair crossing segments are overlaid.
"""

from __future__ import annotations

import math

from .ipbuild import (
    BuildParams,
    build_region_constraints,
    build_region_region_constraints,
    generate_candidates,
)
from .model import DetectionSet, PlanarGraph

_REGION_COLORS = ["#e6550d", "#3182bd", "#31a354", "#756bb1", "#636363",
                  "#fdae6b", "#9ecae1", "#a1d99b", "#bcbddc", "#bdbdbd"]


def _svg_open(canvas: tuple[int, int]) -> str:
    w, h = canvas
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
            f'height="{h}" viewBox="0 0 {w} {h}">')


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def render_graph_svg(g: PlanarGraph,
                     canvas: tuple[int, int] = (256, 256)) -> str:
    lines = [_svg_open(canvas)]
    for a, b in g.edges:
        pa, pb = g.vertices[a], g.vertices[b]
        lines.append(f'<line x1="{_fmt(pa.x)}" y1="{_fmt(pa.y)}" '
                     f'x2="{_fmt(pb.x)}" y2="{_fmt(pb.y)}" '
                     f'stroke="#222222" stroke-width="1.5"/>')
    for vid, p in sorted(g.vertices.items()):
        lines.append(f'<circle cx="{_fmt(p.x)}" cy="{_fmt(p.y)}" r="3" '
                     f'fill="#d62728"><title>{vid}</title></circle>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _mask_path(mask) -> str:
    """One path subcommand per foreground run of the mask."""
    import numpy as np

    parts = []
    h, w = mask.shape
    for y in range(h):
        row = mask[y]
        if not row.any():
            continue
        change = np.flatnonzero(row[1:] != row[:-1]) + 1
        bounds = [0, *change.tolist(), w]
        x = 0
        fg = bool(row[0])
        for i in range(len(bounds) - 1):
            ln = bounds[i + 1] - bounds[i]
            if fg:
                parts.append(f"M{x} {y}h{ln}v1h-{ln}z")
            x += ln
            fg = not fg
    return "".join(parts)


def render_detections_svg(d: DetectionSet, debug: bool = False,
                          params: BuildParams | None = None) -> str:
    lines = [_svg_open(d.canvas)]
    for i, r in enumerate(d.regions):
        color = _REGION_COLORS[i % len(_REGION_COLORS)]
        path = _mask_path(r.mask)
        lines.append(f'<g class="region" fill="{color}" fill-opacity="0.35">'
                     f'<path d="{path}"/></g>')
    for c in d.corners:
        lines.append(f'<circle cx="{_fmt(c.position.x)}" '
                     f'cy="{_fmt(c.position.y)}" r="3" fill="#1f77b4" '
                     f'fill-opacity="{_fmt(max(0.25, c.confidence))}">'
                     f'<title>{c.id}</title></circle>')
    if debug:
        params = params or BuildParams()
        candidates = generate_candidates(d, params)
        _, probes, _ = build_region_constraints(d, candidates, params)
        for probe in probes:
            ang = math.radians(probe.direction_deg)
            x2 = probe.origin.x + params.ray_length * math.cos(ang)
            y2 = probe.origin.y + params.ray_length * math.sin(ang)
            lines.append(f'<line class="ray" x1="{_fmt(probe.origin.x)}" '
                         f'y1="{_fmt(probe.origin.y)}" x2="{_fmt(x2)}" '
                         f'y2="{_fmt(y2)}" stroke="#ff7f0e" '
                         f'stroke-width="0.3" stroke-opacity="0.6"/>')
        _, betas, _ = build_region_region_constraints(d, candidates, params)
        for seg in betas:
            lines.append(f'<line class="beta" x1="{_fmt(seg.a.x)}" '
                         f'y1="{_fmt(seg.a.y)}" x2="{_fmt(seg.b.x)}" '
                         f'y2="{_fmt(seg.b.y)}" stroke="#d62728" '
                         f'stroke-width="1"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
