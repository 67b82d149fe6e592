"""Command-line interface.

Subcommands: assemble, simulate, evaluate, export-lp, render, serve.
Exit codes: 0 success / optimal, 3 time limit hit (assemble still writes
the incumbent graph), 1 malformed input, 2 internal error.  The default
solver time limit can be set via the BUILDGRAPH_TIME_LIMIT environment
variable.
"""

from __future__ import annotations

import argparse
import glob as globlib
import json
import os
import sys
from pathlib import Path

from . import fileio, lpformat, metrics, render
from .ipbuild import DEFAULT_LAMBDAS, BuildParams, build
from .model import FeatureConfig, InvalidDetectionsError, InvalidGraphError
from .pipeline import assemble
from .simdet import GraphOffCanvasError, NoiseConfig, simulate
from .solver import STATUS_TIME_LIMIT

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2
EXIT_TIME_LIMIT = 3

TIME_LIMIT_ENV = "BUILDGRAPH_TIME_LIMIT"

_INPUT_ERRORS = (fileio.FormatError, lpformat.LPParseError,
                 InvalidDetectionsError, InvalidGraphError,
                 GraphOffCanvasError, metrics.LengthMismatchError)


def _features(spec: str) -> FeatureConfig:
    return FeatureConfig.from_tokens(spec.split(","))


def _lambda_overrides(pairs: list[str]) -> dict[str, float]:
    lambdas = dict(DEFAULT_LAMBDAS)
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--lambda expects family=value, got {pair!r}")
        family, value = pair.split("=", 1)
        if family not in lambdas:
            raise ValueError(f"unknown soft family {family!r}; known: "
                             + ", ".join(sorted(lambdas)))
        lambdas[family] = float(value)
    return lambdas


def _default_time_limit() -> float | None:
    raw = os.environ.get(TIME_LIMIT_ENV)
    return float(raw) if raw else None


def cmd_assemble(args) -> int:
    det = fileio.load_detections(args.detections)
    cfg = _features(args.features)
    params = BuildParams(lambdas=_lambda_overrides(args.lam))
    time_limit = args.time_limit if args.time_limit is not None \
        else _default_time_limit()
    result = assemble(det, cfg, params, time_limit=time_limit,
                      post=args.post)
    fileio.save_graph(result.graph, args.out)
    if args.svg:
        Path(args.svg).write_text(
            render.render_graph_svg(result.graph, det.canvas))
    sr = result.solve_result
    print(f"status={sr.status} objective="
          f"{'-' if sr.objective is None else f'{sr.objective:.6f}'} "
          f"vertices={len(result.graph.vertices)} "
          f"edges={len(result.graph.edges)}")
    if sr.status == STATUS_TIME_LIMIT:
        return EXIT_TIME_LIMIT
    return EXIT_OK


def cmd_simulate(args) -> int:
    gt = fileio.load_graph(args.gt)
    if args.clean:
        cfg = NoiseConfig.clean(seed=args.seed)
    else:
        cfg = NoiseConfig(
            seed=args.seed,
            corner_jitter_sigma=args.corner_jitter,
            corner_drop_rate=args.corner_drop_rate,
            spurious_corner_rate=args.spurious_corner_rate,
            true_corner_conf_range=tuple(args.true_conf_range),
            false_corner_conf_range=tuple(args.false_conf_range),
            edge_map_fg=args.edge_fg,
            edge_map_bg=args.edge_bg,
            edge_map_noise_sigma=args.edge_noise,
            dir_bin_true_conf=args.dir_true_conf,
            dir_bin_false_conf=args.dir_false_conf,
            region_erode_px=args.erode_regions,
            rr_boundary_drop_rate=args.rr_drop_rate,
        )
    det = simulate(gt, cfg, canvas=(args.canvas, args.canvas))
    fileio.save_detections(det, args.out)
    print(f"corners={len(det.corners)} regions={len(det.regions)} "
          f"rr={len(det.rr_boundaries)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred_paths = sorted(globlib.glob(args.pred))
    gt_paths = sorted(globlib.glob(args.gt))
    if len(pred_paths) == 1 and len(gt_paths) == 1:
        pairs = [(pred_paths[0], gt_paths[0])]
    else:
        pred_by_name = {Path(p).name: p for p in pred_paths}
        gt_by_name = {Path(p).name: p for p in gt_paths}
        if not gt_by_name or set(pred_by_name) != set(gt_by_name):
            only_p = sorted(set(pred_by_name) - set(gt_by_name))
            only_g = sorted(set(gt_by_name) - set(pred_by_name))
            raise fileio.FormatError(
                f"prediction/ground-truth pairing mismatch "
                f"(unmatched pred: {only_p}, unmatched gt: {only_g})")
        pairs = [(pred_by_name[n], gt_by_name[n])
                 for n in sorted(gt_by_name)]
    preds = [fileio.load_graph(p) for p, _ in pairs]
    gts = [fileio.load_graph(g) for _, g in pairs]
    report = metrics.evaluate(preds, gts)
    if args.out:
        Path(args.out).write_text(
            fileio.dumps_canonical(report.to_dict()))
    print(" ".join(f"{v:.1f}" for v in report.scores().values()))
    return EXIT_OK


def cmd_export_lp(args) -> int:
    det = fileio.load_detections(args.detections)
    cfg = _features(args.features)
    params = BuildParams(lambdas=_lambda_overrides(args.lam))
    program = build(det, cfg, params)
    Path(args.out).write_text(lpformat.write_lp(program))
    print(f"variables={len(program.variables)} "
          f"constraints={len(program.constraints)}")
    return EXIT_OK


def cmd_render(args) -> int:
    obj = json.loads(Path(args.input).read_text())
    if isinstance(obj, dict) and "vertices" in obj:
        g = fileio.graph_from_obj(obj)
        svg = render.render_graph_svg(g)
    elif isinstance(obj, dict) and "corners" in obj:
        det = fileio.detections_from_obj(obj)
        svg = render.render_detections_svg(det, debug=args.debug)
    else:
        raise fileio.FormatError(
            f"{args.input}: neither a graph nor a detection file")
    Path(args.out).write_text(svg)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="buildgraph",
        description="Planar building-graph assembly from detected "
                    "primitives via exact 0-1 optimization.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble",
                       help="solve detections into a planar graph")
    p.add_argument("detections")
    p.add_argument("--out", required=True)
    p.add_argument("--features", default="all",
                   help="comma list: edges,corners,ce,regions,rr or 'all'")
    p.add_argument("--lambda", dest="lam", action="append", default=[],
                   metavar="FAM=VAL",
                   help="soft-constraint penalty override (repeatable)")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--svg", default=None,
                   help="also render the result to this SVG path")
    p.add_argument("--post", dest="post", action="store_true", default=True)
    p.add_argument("--no-post", dest="post", action="store_false",
                   help="skip the collinear-vertex merge")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("simulate",
                       help="synthesize detections from a ground-truth graph")
    p.add_argument("gt")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--canvas", type=int, default=256)
    p.add_argument("--clean", action="store_true",
                   help="noise-free preset (overrides the other knobs)")
    p.add_argument("--corner-jitter", type=float, default=1.0)
    p.add_argument("--corner-drop-rate", type=float, default=0.0)
    p.add_argument("--spurious-corner-rate", type=float, default=0.0)
    p.add_argument("--true-conf-range", type=float, nargs=2,
                   default=[0.8, 1.0])
    p.add_argument("--false-conf-range", type=float, nargs=2,
                   default=[0.2, 0.5])
    p.add_argument("--edge-fg", type=float, default=0.9)
    p.add_argument("--edge-bg", type=float, default=0.05)
    p.add_argument("--edge-noise", type=float, default=0.05)
    p.add_argument("--dir-true-conf", type=float, default=0.9)
    p.add_argument("--dir-false-conf", type=float, default=0.05)
    p.add_argument("--erode-regions", type=int, default=0)
    p.add_argument("--rr-drop-rate", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate",
                       help="score predicted graphs against ground truth")
    p.add_argument("pred", help="glob of predicted graph files")
    p.add_argument("gt", help="glob of ground-truth graph files")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-lp",
                       help="write the program in textual LP format")
    p.add_argument("detections")
    p.add_argument("--out", required=True)
    p.add_argument("--features", default="all")
    p.add_argument("--lambda", dest="lam", action="append", default=[],
                   metavar="FAM=VAL")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("render", help="render a graph or detections to SVG")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--debug", action="store_true",
                   help="overlay enclosure rays and boundary probes")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
