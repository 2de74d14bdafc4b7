"""FastAPI service exposing the toolkit's constructions and analyses.

Library errors map to structured JSON bodies: metric/input problems come back
as 422 with the violated axiom and witness ids, property violations
(NotATree) and exceeded budgets as 409. The CLI translates these into its
exit codes.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from coarseforest import __version__
from coarseforest.errors import (
    BudgetExceededError,
    CoarseForestError,
    MetricValidationError,
    NotATreeError,
)
from coarseforest.files import (
    gamma_to_json_dict,
    graph_from_json_dict,
    graph_to_json_dict,
    leveled_to_json_dict,
    space_from_json_dict,
    to_dot,
)
from coarseforest.gamma import build_gamma, verify_gamma_qi
from coarseforest.graph import (
    Graph,
    bottleneck_delta,
    expansion_profile,
    four_point_delta,
    properness_profile,
)
from coarseforest.hyperbolic import (
    LeveledGraph,
    build_h,
    build_rh,
    level_component_analysis,
    pq_detector,
    rips_graph,
)
from coarseforest.metric import FiniteMetricSpace
from coarseforest.scales import parse_scale
from coarseforest.service import schemas
from coarseforest.treeify import treeify_metric, treeify_pipeline

_STATUS = {NotATreeError: 409, BudgetExceededError: 409}


def _space(payload: schemas.SpacePayload) -> FiniteMetricSpace:
    return space_from_json_dict(payload.model_dump(exclude_none=True))


def _graph(payload: schemas.GraphPayload) -> tuple[Graph, dict, dict]:
    return graph_from_json_dict(payload.model_dump())


def _function(spec: schemas.FunctionSpec, graph: Graph, levels: dict) -> dict[str, float]:
    if spec.kind == "id":
        try:
            return {v: float(v) for v in graph.vertex_ids}
        except ValueError:
            raise ValueError("vertex ids are not numeric; supply f explicitly") from None
    if spec.kind == "level":
        missing = [v for v in graph.vertex_ids if v not in levels]
        if missing:
            raise ValueError(f"vertices without a level tag: {missing[:5]}")
        return {v: float(levels[v]) for v in graph.vertex_ids}
    if spec.kind == "const":
        return {v: float(spec.value) for v in graph.vertex_ids}
    missing = [v for v in graph.vertex_ids if v not in spec.values]
    if missing:
        raise ValueError(f"f table misses vertices: {missing[:5]}")
    return {v: float(spec.values[v]) for v in graph.vertex_ids}


def create_app() -> FastAPI:
    app = FastAPI(title="coarseforest", version=__version__)

    @app.exception_handler(CoarseForestError)
    async def _coarse_error(request: Request, exc: CoarseForestError):
        status = next(
            (code for cls, code in _STATUS.items() if isinstance(exc, cls)), 422
        )
        return JSONResponse(status_code=status, content={"detail": exc.payload()})

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"detail": {"code": "BadRequest", "message": str(exc)}},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/metric/validate", response_model=schemas.ValidateResponse)
    def metric_validate(req: schemas.ValidateRequest) -> schemas.ValidateResponse:
        try:
            space = _space(req.space)
        except MetricValidationError as exc:
            return schemas.ValidateResponse(
                valid=False,
                violation=schemas.ViolationPayload(
                    code=exc.code,
                    message=str(exc),
                    witness=[str(w) for w in exc.witness],
                ),
            )
        return schemas.ValidateResponse(valid=True, n=space.n, ids=list(space.ids))

    @app.post("/build", response_model=schemas.BuildResponse)
    def build(req: schemas.BuildRequest) -> schemas.BuildResponse:
        params: dict = {"flavor": req.flavor}
        if req.flavor in ("h", "rh"):
            if req.space is None:
                raise ValueError("flavor %r needs a metric space input" % req.flavor)
            space = _space(req.space)
            r = parse_scale(req.r if req.r is not None else "1/6")
            builder = build_h if req.flavor == "h" else build_rh
            kwargs = {} if req.flavor == "rh" else {"criterion": req.criterion}
            leveled: LeveledGraph = builder(space, r, req.k_min, req.k_max, **kwargs)
            params.update(r=str(r), levels=list(leveled.level_range))
            return schemas.BuildResponse(
                graph=leveled_to_json_dict(leveled),
                dot=to_dot(leveled.graph, leveled.level, leveled.kind),
                report=level_component_analysis(leveled).as_dict(),
                parameters=params,
            )
        if req.flavor == "rips":
            if req.space is None:
                raise ValueError("flavor 'rips' needs a metric space input")
            if req.t is None:
                raise ValueError("flavor 'rips' needs the scale t")
            space = _space(req.space)
            graph = rips_graph(space, req.t)
            params.update(t=req.t)
            return schemas.BuildResponse(
                graph=graph_to_json_dict(graph), dot=to_dot(graph), parameters=params
            )
        # gamma over a graph or a metric space
        if req.R is None:
            raise ValueError("flavor 'gamma' needs the radius R")
        if req.graph is not None:
            source, _, _ = _graph(req.graph)
        elif req.space is not None:
            source = _space(req.space)
        else:
            raise ValueError("flavor 'gamma' needs a graph or space input")
        gamma = build_gamma(source, req.R)
        params.update(R=req.R)
        return schemas.BuildResponse(
            graph=gamma_to_json_dict(gamma),
            dot=to_dot(gamma.graph),
            report=verify_gamma_qi(gamma).as_dict(),
            parameters=params,
        )

    @app.post("/analyze", response_model=schemas.AnalyzeResponse)
    def analyze(req: schemas.AnalyzeRequest) -> schemas.AnalyzeResponse:
        params: dict = {"seed": req.seed}
        if req.op == "pq":
            if req.space is None:
                raise ValueError("op 'pq' needs a metric space input")
            space = _space(req.space)
            r = parse_scale(req.r if req.r is not None else "1/7")
            report = pq_detector(space, r, req.D)
            params.update(r=str(r), D=req.D)
            return schemas.AnalyzeResponse(op=req.op, report=report.as_dict(), parameters=params)
        if req.graph is None:
            raise ValueError(f"op {req.op!r} needs a graph input")
        graph, levels, kinds = _graph(req.graph)
        if req.op == "delta":
            budget = req.budget or 5_000_000
            mode = "exhaustive" if graph.n**4 <= budget else "sampled"
            if req.exact and mode == "sampled":
                raise BudgetExceededError(
                    f"exhaustive quadruple scan needs n^4 = {graph.n ** 4} <= budget {budget}"
                )
            value = four_point_delta(graph, sample_budget=budget, seed=req.seed)
            params.update(budget=budget)
            return schemas.AnalyzeResponse(
                op=req.op,
                report={"fourPointDelta": value, "mode": mode},
                parameters=params,
            )
        if req.op == "bottleneck":
            budget = req.budget or 250_000
            pair_total = graph.n * (graph.n - 1) // 2
            if req.exact and pair_total > budget:
                raise BudgetExceededError(
                    f"exhaustive pair scan needs {pair_total} <= budget {budget}"
                )
            rep = bottleneck_delta(graph, sample_budget=budget, seed=req.seed)
            params.update(budget=budget)
            return schemas.AnalyzeResponse(
                op=req.op,
                report={
                    "bottleneckDelta": rep.delta,
                    "witnessPair": list(rep.witness_pair) if rep.witness_pair else None,
                    "witnessMidpoint": rep.witness_midpoint,
                    "pairCount": rep.pair_count,
                    "mode": rep.mode,
                },
                parameters=params,
            )
        if req.op == "levels":
            if req.r is None:
                raise ValueError("op 'levels' needs the parameter r of the leveled graph")
            leveled = _leveled_from_graph(graph, levels, kinds, req.r)
            return schemas.AnalyzeResponse(
                op=req.op,
                report=level_component_analysis(leveled).as_dict(),
                parameters={"r": req.r},
            )
        f = _function(req.f or schemas.FunctionSpec(), graph, levels)
        if req.op == "properness":
            profile = properness_profile(graph, f, req.half_width, req.band_step)
            params.update(half_width=req.half_width, band_step=req.band_step)
            return schemas.AnalyzeResponse(
                op=req.op,
                report={
                    "M": profile.M,
                    "rows": [
                        {
                            "center": row.center,
                            "component": row.component_index,
                            "vertexCount": row.vertex_count,
                            "hopDiameter": row.hop_diameter,
                        }
                        for row in profile.rows
                    ],
                },
                parameters=params,
            )
        thresholds = req.thresholds or [1.0, 2.0, 3.0]
        profile = expansion_profile(graph, f, thresholds)
        params.update(thresholds=thresholds)
        return schemas.AnalyzeResponse(
            op=req.op,
            report={"samples": [[t, rho] for t, rho in profile.samples]},
            parameters=params,
        )

    @app.post("/treeify", response_model=schemas.TreeifyResponse)
    def treeify(req: schemas.TreeifyRequest) -> schemas.TreeifyResponse:
        if req.graph is not None:
            graph, levels, _ = _graph(req.graph)
            f = _function(req.f, graph, levels)
            result = treeify_pipeline(graph, f, sample_budget=req.budget, seed=req.seed)
        else:
            space = _space(req.space)
            if req.f.kind == "values":
                f = {p: float(req.f.values[p]) for p in space.ids}
            elif req.f.kind == "const":
                f = {p: float(req.f.value) for p in space.ids}
            else:
                f = {p: float(p) for p in space.ids}
            result = treeify_metric(
                space, f, R=req.R, sample_budget=req.budget, seed=req.seed
            )
        return schemas.TreeifyResponse(
            tree=graph_to_json_dict(result.tree),
            dot=to_dot(result.tree),
            manifest=result.manifest(),
            pi=dict(result.quotient.pi),
        )

    return app


def _leveled_from_graph(graph: Graph, levels: dict, kinds: dict, r: str) -> LeveledGraph:
    """Rebuild enough leveled structure from graph JSON for level analysis."""
    if len(levels) != graph.n:
        raise ValueError("op 'levels' needs a level tag on every vertex")
    ks = sorted(set(levels.values()))
    dummy = FiniteMetricSpace(ids=("z",), dist=np.zeros((1, 1)))
    return LeveledGraph(
        graph=graph,
        space=dummy,
        r=parse_scale(r),
        flavor="RH",
        level_range=(ks[0], ks[-1]),
        level=dict(levels),
        kind=dict(kinds),
        anchor={v: v for v in graph.vertex_ids},
    )


app = create_app()
