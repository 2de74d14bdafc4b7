"""Pydantic request/response models for the analysis service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, model_validator


class SpacePayload(BaseModel):
    """A metric space as a distance matrix or a point cloud."""

    ids: Optional[list[str]] = None
    dist: Optional[list[list[float]]] = None
    points: Optional[list[list[float]]] = None
    metric: Literal["euclidean", "chebyshev"] = "euclidean"

    @model_validator(mode="after")
    def _one_of(self):
        if (self.dist is None) == (self.points is None):
            raise ValueError("provide exactly one of 'dist' or 'points'")
        return self


class VertexPayload(BaseModel):
    id: str
    level: Optional[int] = None


class EdgePayload(BaseModel):
    u: str
    v: str
    len: float = 1.0
    kind: Literal["horizontal", "radial", "plain"] = "plain"


class GraphPayload(BaseModel):
    vertices: list[VertexPayload]
    edges: list[EdgePayload]


class FunctionSpec(BaseModel):
    """A vertex function: numeric ids, level tags, a constant, or a table."""

    kind: Literal["id", "level", "const", "values"] = "id"
    value: Optional[float] = None
    values: Optional[dict[str, float]] = None

    @model_validator(mode="after")
    def _complete(self):
        if self.kind == "const" and self.value is None:
            raise ValueError("kind 'const' requires 'value'")
        if self.kind == "values" and not self.values:
            raise ValueError("kind 'values' requires a nonempty 'values' table")
        return self


class ValidateRequest(BaseModel):
    space: SpacePayload
    tol: float = 1e-9


class ViolationPayload(BaseModel):
    code: str
    message: str
    witness: list[str] = Field(default_factory=list)


class ValidateResponse(BaseModel):
    valid: bool
    n: Optional[int] = None
    ids: Optional[list[str]] = None
    violation: Optional[ViolationPayload] = None


class BuildRequest(BaseModel):
    flavor: Literal["h", "rh", "rips", "gamma"]
    space: Optional[SpacePayload] = None
    graph: Optional[GraphPayload] = None
    r: Optional[str] = None
    t: Optional[float] = None
    R: Optional[float] = None
    k_min: Optional[int] = None
    k_max: Optional[int] = None
    criterion: Literal["witness", "metric"] = "witness"


class BuildResponse(BaseModel):
    graph: dict[str, Any]
    dot: str
    report: Optional[dict[str, Any]] = None
    parameters: dict[str, Any] = Field(default_factory=dict)


class AnalyzeRequest(BaseModel):
    op: Literal["delta", "bottleneck", "levels", "pq", "properness", "expansion"]
    space: Optional[SpacePayload] = None
    graph: Optional[GraphPayload] = None
    r: Optional[str] = None
    D: Optional[int] = None
    f: Optional[FunctionSpec] = None
    half_width: float = 1.0
    band_step: float = 1.0
    thresholds: Optional[list[float]] = None
    budget: Optional[int] = None
    exact: bool = False
    seed: int = 0


class AnalyzeResponse(BaseModel):
    op: str
    report: dict[str, Any]
    parameters: dict[str, Any] = Field(default_factory=dict)


class TreeifyRequest(BaseModel):
    graph: Optional[GraphPayload] = None
    space: Optional[SpacePayload] = None
    f: FunctionSpec = Field(default_factory=FunctionSpec)
    R: Optional[float] = None
    budget: int = 250_000
    seed: int = 0

    @model_validator(mode="after")
    def _one_of(self):
        if (self.graph is None) == (self.space is None):
            raise ValueError("provide exactly one of 'graph' or 'space'")
        return self


class TreeifyResponse(BaseModel):
    tree: dict[str, Any]
    dot: str
    manifest: dict[str, Any]
    pi: dict[str, str]
