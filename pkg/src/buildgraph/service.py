"""HTTP service exposing the assembly pipeline.

Endpoints mirror the CLI: POST /assemble, /simulate, /evaluate,
/export-lp, /render, plus GET /health.  Request and response bodies use
the same JSON schemas as the on-disk file formats, so a detection file
can be posted as-is.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import fileio, lpformat, metrics, render
from .ipbuild import DEFAULT_LAMBDAS, BuildParams, build
from .model import FeatureConfig
from .pipeline import assemble
from .simdet import NoiseConfig, simulate

app = FastAPI(
    title="buildgraph",
    description="Planar building-graph assembly from detected primitives "
                "via exact 0-1 optimization.",
    version="0.1.0",
)


class MaskModel(BaseModel):
    width: int
    height: int
    rows: list[list[int]]


class EdgeMapModel(BaseModel):
    width: int
    height: int
    encoding: Literal["rle-rows"]
    rows: list[list[int]]
    scale: float
    values: list[list[int]] | None = None


class CornerModel(BaseModel):
    id: int
    x: float
    y: float
    conf: float
    bins: list[float]


class RegionModel(BaseModel):
    id: int
    conf: float
    mask: MaskModel


class RRBoundaryModel(BaseModel):
    a: int
    b: int
    masks: list[MaskModel]


class DetectionsModel(BaseModel):
    canvas: tuple[int, int]
    corners: list[CornerModel]
    edge_map: EdgeMapModel
    regions: list[RegionModel]
    rr_boundaries: list[RRBoundaryModel]


class VertexModel(BaseModel):
    id: int
    x: float
    y: float


class GraphModel(BaseModel):
    vertices: list[VertexModel]
    edges: list[tuple[int, int]]


class AssembleRequest(BaseModel):
    detections: DetectionsModel
    features: str = "all"
    lambdas: dict[str, float] = Field(default_factory=dict)
    time_limit: float | None = None
    post: bool = True


class AssembleResponse(BaseModel):
    status: str
    objective: float | None
    bound: float | None
    gap: float | None
    hard_feasible: bool | None
    graph: GraphModel


class SimulateRequest(BaseModel):
    gt: GraphModel
    seed: int = 0
    canvas: tuple[int, int] = (256, 256)
    clean: bool = False
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


class SimulateResponse(BaseModel):
    detections: DetectionsModel


class EvaluateRequest(BaseModel):
    pred: list[GraphModel]
    gt: list[GraphModel]
    canvas: tuple[int, int] = (256, 256)


class ExportLPRequest(BaseModel):
    detections: DetectionsModel
    features: str = "all"
    lambdas: dict[str, float] = Field(default_factory=dict)


class ExportLPResponse(BaseModel):
    lp: str
    n_variables: int
    n_constraints: int


class RenderRequest(BaseModel):
    graph: GraphModel | None = None
    detections: DetectionsModel | None = None
    debug: bool = False


class RenderResponse(BaseModel):
    svg: str


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


def _features(spec: str) -> FeatureConfig:
    try:
        return FeatureConfig.from_tokens(spec.split(","))
    except ValueError as exc:
        raise _bad_request(exc) from exc


def _params(lambdas: dict[str, float]) -> BuildParams:
    merged = dict(DEFAULT_LAMBDAS)
    for family, value in lambdas.items():
        if family not in merged:
            raise _bad_request(ValueError(f"unknown soft family {family!r}"))
        merged[family] = value
    return BuildParams(lambdas=merged)


def _detections(model: DetectionsModel):
    try:
        return fileio.detections_from_obj(model.model_dump(exclude_none=True))
    except fileio.FormatError as exc:
        raise _bad_request(exc) from exc


def _graph(model: GraphModel):
    try:
        return fileio.graph_from_obj(model.model_dump())
    except fileio.FormatError as exc:
        raise _bad_request(exc) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/assemble", response_model=AssembleResponse)
def post_assemble(req: AssembleRequest) -> AssembleResponse:
    det = _detections(req.detections)
    cfg = _features(req.features)
    result = assemble(det, cfg, _params(req.lambdas),
                      time_limit=req.time_limit, post=req.post)
    sr = result.solve_result
    return AssembleResponse(
        status=sr.status,
        objective=sr.objective,
        bound=sr.bound,
        gap=sr.gap,
        hard_feasible=(result.hard_feasibility.ok
                       if result.hard_feasibility is not None else None),
        graph=GraphModel(**fileio.graph_to_obj(result.graph)),
    )


@app.post("/simulate", response_model=SimulateResponse)
def post_simulate(req: SimulateRequest) -> SimulateResponse:
    gt = _graph(req.gt)
    try:
        if req.clean:
            cfg = NoiseConfig.clean(seed=req.seed)
        else:
            cfg = NoiseConfig(
                seed=req.seed,
                corner_jitter_sigma=req.corner_jitter_sigma,
                corner_drop_rate=req.corner_drop_rate,
                spurious_corner_rate=req.spurious_corner_rate,
                true_corner_conf_range=req.true_corner_conf_range,
                false_corner_conf_range=req.false_corner_conf_range,
                edge_map_fg=req.edge_map_fg,
                edge_map_bg=req.edge_map_bg,
                edge_map_noise_sigma=req.edge_map_noise_sigma,
                dir_bin_true_conf=req.dir_bin_true_conf,
                dir_bin_false_conf=req.dir_bin_false_conf,
                region_erode_px=req.region_erode_px,
                rr_boundary_drop_rate=req.rr_boundary_drop_rate,
            )
        det = simulate(gt, cfg, canvas=req.canvas)
    except ValueError as exc:
        raise _bad_request(exc) from exc
    return SimulateResponse(
        detections=DetectionsModel(**fileio.detections_to_obj(det)))


@app.post("/evaluate")
def post_evaluate(req: EvaluateRequest) -> dict:
    preds = [_graph(m) for m in req.pred]
    gts = [_graph(m) for m in req.gt]
    try:
        report = metrics.evaluate(preds, gts, canvas=req.canvas)
    except metrics.LengthMismatchError as exc:
        raise _bad_request(exc) from exc
    return report.to_dict()


@app.post("/export-lp", response_model=ExportLPResponse)
def post_export_lp(req: ExportLPRequest) -> ExportLPResponse:
    det = _detections(req.detections)
    program = build(det, _features(req.features), _params(req.lambdas))
    return ExportLPResponse(lp=lpformat.write_lp(program),
                            n_variables=len(program.variables),
                            n_constraints=len(program.constraints))


@app.post("/render", response_model=RenderResponse)
def post_render(req: RenderRequest) -> RenderResponse:
    if (req.graph is None) == (req.detections is None):
        raise _bad_request(
            ValueError("provide exactly one of 'graph' or 'detections'"))
    if req.graph is not None:
        svg = render.render_graph_svg(_graph(req.graph))
    else:
        svg = render.render_detections_svg(_detections(req.detections),
                                           debug=req.debug)
    return RenderResponse(svg=svg)
