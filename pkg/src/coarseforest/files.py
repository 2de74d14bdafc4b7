"""File formats: distance-matrix CSV/JSON, point clouds, graph JSON and DOT.

Graph JSON schema:
    {"vertices": [{"id": ..., "level": <int, optional>}],
     "edges": [{"u": ..., "v": ..., "len": ..., "kind": "horizontal"|"radial"|"plain"}]}

Distance matrix JSON: {"ids": [...], "dist": [[...]]}.
Point cloud JSON: {"points": [[...]], "metric": "euclidean"|"chebyshev"}.
All emitted JSON is sorted-key with a trailing newline so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from coarseforest.errors import MetricValidationError
from coarseforest.gamma import GammaGraph
from coarseforest.graph import Graph, edge_key
from coarseforest.hyperbolic import LeveledGraph
from coarseforest.metric import FiniteMetricSpace, validate_metric

POINT_METRICS = ("euclidean", "chebyshev")


def space_from_points(
    points: Sequence[Sequence[float]],
    metric: str = "euclidean",
    ids: Sequence[str] | None = None,
) -> FiniteMetricSpace:
    """Distance matrix of a point cloud under the named metric."""
    if metric not in POINT_METRICS:
        raise MetricValidationError(
            "MalformedMatrix", (), f"unknown point metric {metric!r}"
        )
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise MetricValidationError("MalformedMatrix", (), "points must be a nonempty 2d array")
    diff = arr[:, None, :] - arr[None, :, :]
    if metric == "euclidean":
        dist = np.sqrt((diff**2).sum(axis=2))
    else:
        dist = np.abs(diff).max(axis=2)
    return validate_metric(dist, ids=ids, coords=arr.tolist())


def space_from_json_dict(payload: Mapping) -> FiniteMetricSpace:
    if "dist" in payload:
        return validate_metric(payload["dist"], ids=payload.get("ids"))
    if "points" in payload:
        return space_from_points(
            payload["points"], payload.get("metric", "euclidean"), payload.get("ids")
        )
    raise MetricValidationError(
        "MalformedMatrix", (), "space JSON needs either 'dist' or 'points'"
    )


def space_to_json_dict(space: FiniteMetricSpace) -> dict:
    return {"ids": list(space.ids), "dist": space.dist.tolist()}


def _parse_csv_rows(rows: list[list[str]]) -> FiniteMetricSpace:
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise MetricValidationError("MalformedMatrix", (), "empty CSV")

    def numeric(row: list[str]) -> bool:
        try:
            [float(cell) for cell in row]
            return True
        except ValueError:
            return False

    # header row of ids: non-numeric first row, or one extra row over a
    # square numeric block (covers numeric id labels)
    ids = None
    has_header = not numeric(rows[0]) or (
        len(rows) == len(rows[0]) + 1 and all(numeric(r) for r in rows[1:])
    )
    if has_header:
        ids = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
    width = len(rows[0]) if rows else 0
    if any(len(row) != width for row in rows):
        raise MetricValidationError("MalformedMatrix", (), "ragged CSV rows")
    try:
        matrix = [[float(cell) for cell in row] for row in rows]
    except ValueError as exc:
        raise MetricValidationError("MalformedMatrix", (), f"non-numeric cell: {exc}") from None
    return validate_metric(matrix, ids=ids)


def load_space(path: str | Path) -> FiniteMetricSpace:
    """Load a metric space from CSV (n x n, optional id header row) or JSON."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as handle:
            return _parse_csv_rows(list(csv.reader(handle)))
    with open(path) as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise MetricValidationError("MalformedMatrix", (), f"invalid JSON: {exc}") from None
    return space_from_json_dict(payload)


def graph_to_json_dict(
    graph: Graph,
    level: Mapping[str, int] | None = None,
    kind: Mapping[tuple[str, str], str] | None = None,
) -> dict:
    vertices = []
    for v in graph.vertex_ids:
        entry: dict = {"id": v}
        if level is not None and v in level:
            entry["level"] = int(level[v])
        vertices.append(entry)
    edges = []
    for u, v, w in graph.edges:
        entry = {"u": u, "v": v, "len": w}
        entry["kind"] = kind.get(edge_key(u, v), "plain") if kind else "plain"
        edges.append(entry)
    return {"vertices": vertices, "edges": edges}


def leveled_to_json_dict(leveled: LeveledGraph) -> dict:
    out = graph_to_json_dict(leveled.graph, level=leveled.level, kind=leveled.kind)
    out["r"] = str(leveled.r)
    out["flavor"] = leveled.flavor
    out["levelRange"] = list(leveled.level_range)
    out["anchor"] = dict(leveled.anchor)
    if leveled.balls is not None:
        out["balls"] = {v: sorted(members) for v, members in leveled.balls.items()}
    return out


def gamma_to_json_dict(gamma: GammaGraph) -> dict:
    out = graph_to_json_dict(gamma.graph)
    for entry in out["vertices"]:
        entry["ball"] = sorted(gamma.ball_of[entry["id"]])
        entry["center"] = gamma.j[entry["id"]]
    out["R"] = gamma.R
    out["A"] = list(gamma.A)
    return out


def coned_to_json_dict(coned) -> dict:
    """Annotated graph JSON for a coned complex: skeleton + cones + triangles."""
    out = graph_to_json_dict(coned.skeleton)
    cone_ids = set(coned.cone_vertices)
    for entry in out["vertices"]:
        entry["cone"] = entry["id"] in cone_ids
    out["centers"] = list(coned.A)
    out["L"] = coned.L
    out["R"] = coned.R
    out["triangles"] = [list(t) for t in coned.triangles]
    return out


def quotient_to_json_dict(quotient) -> dict:
    """Annotated graph JSON for a quotient tree: projection and region data."""
    out = graph_to_json_dict(quotient.tree)
    out["pi"] = dict(quotient.pi)
    out["edgeOfTrack"] = {k: list(v) for k, v in quotient.edge_of_track.items()}
    out["regionMembers"] = {k: list(v) for k, v in quotient.region_members.items()}
    return out


def graph_from_json_dict(payload: Mapping) -> tuple[Graph, dict[str, int], dict]:
    """Parse graph JSON; returns (graph, levels, edge kinds)."""
    if "vertices" not in payload or "edges" not in payload:
        raise ValueError("graph JSON needs 'vertices' and 'edges'")
    ids = [str(v["id"]) for v in payload["vertices"]]
    levels = {
        str(v["id"]): int(v["level"]) for v in payload["vertices"] if "level" in v and v["level"] is not None
    }
    edges = []
    kinds: dict[tuple[str, str], str] = {}
    for e in payload["edges"]:
        u, v = str(e["u"]), str(e["v"])
        edges.append((u, v, float(e.get("len", 1.0))))
        kinds[edge_key(u, v)] = e.get("kind", "plain")
    return Graph(ids, edges), levels, kinds


def load_graph(path: str | Path) -> tuple[Graph, dict[str, int], dict]:
    with open(path) as handle:
        return graph_from_json_dict(json.load(handle))


def to_dot(
    graph: Graph,
    level: Mapping[str, int] | None = None,
    kind: Mapping[tuple[str, str], str] | None = None,
    name: str = "coarseforest",
) -> str:
    """DOT text; vertices sharing a level are pinned to the same rank."""
    lines = [f"graph {name} {{", "  rankdir=BT;"]
    if level:
        by_level: dict[int, list[str]] = {}
        for v in graph.vertex_ids:
            if v in level:
                by_level.setdefault(level[v], []).append(v)
        for k in sorted(by_level):
            row = "; ".join(f'"{v}"' for v in by_level[k])
            lines.append(f"  {{ rank=same; {row}; }}")
    for v in graph.vertex_ids:
        lines.append(f'  "{v}";')
    for u, v, w in graph.edges:
        attrs = []
        if kind and kind.get(edge_key(u, v), "plain") == "radial":
            attrs.append("style=dashed")
        if w != 1.0:
            attrs.append(f'label="{w:g}"')
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f'  "{u}" -- "{v}"{suffix};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def dump_json(payload, path: str | Path) -> None:
    Path(path).write_text(canonical_json(payload))


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
