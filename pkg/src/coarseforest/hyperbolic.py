"""Leveled hyperbolic approximations of finite metric spaces.

Two constructions over a scale parameter r in (0, 1/6]:

* the Rips-stack ``RH``: one vertex per (point, level), horizontal edges at
  level k when d <= r^k, radial edges between consecutive levels when
  d <= r^(lower level);
* the ball net ``H``: vertices are distinct balls B(a, 2 r^k) over greedy
  maximal r^k-separated centers, horizontal edges when balls meet, radial
  edges when the upper ball is contained in the lower one.

Both are truncated to a finite level window; levels outside
[min positive distance / 2, 2 * diameter] are structurally constant and the
default window clamps there.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from coarseforest.errors import RangeExhaustedError
from coarseforest.graph import Graph, edge_key
from coarseforest.metric import (
    ComponentHops,
    FiniteMetricSpace,
    d_finitely_connected,
    greedy_maximal_separated,
    step_mask,
)
from coarseforest.scales import Scalar, at_most, exponent_window, parse_scale, upper_threshold

MAX_RIPS_PARAMETER = Fraction(1, 6)


@dataclass(frozen=True)
class LeveledGraph:
    """A graph whose vertices carry integer levels and tagged edges.

    ``anchor`` maps each vertex to a point id of the underlying space (for RH
    the point itself, for H the chosen ball center); ``balls`` holds the ball
    membership sets for H vertices.
    """

    graph: Graph
    space: FiniteMetricSpace
    r: Fraction
    flavor: str  # "RH" | "H"
    level_range: tuple[int, int]
    level: dict[str, int]
    kind: dict[tuple[str, str], str]
    anchor: dict[str, str]
    balls: dict[str, frozenset[str]] | None = None

    def vertices_at(self, k: int) -> list[str]:
        return [v for v in self.graph.vertex_ids if self.level[v] == k]

    def vertex_of(self, point_id: str, k: int) -> str:
        """RH only: the vertex representing a point at a level."""
        if self.flavor != "RH":
            raise ValueError("per-level point projection exists only for RH")
        vid = rh_vertex_id(point_id, k)
        self.graph.index(vid)
        return vid

    def horizontal_subgraph(self, k: int) -> Graph:
        members = self.vertices_at(k)
        keep = set(members)
        edges = [
            (u, v, w)
            for u, v, w in self.graph.edges
            if u in keep and v in keep and self.kind[edge_key(u, v)] == "horizontal"
        ]
        return Graph(members, edges)

    def levels(self) -> list[int]:
        lo, hi = self.level_range
        return list(range(lo, hi + 1))


@dataclass(frozen=True)
class LevelRow:
    k: int
    component_count: int
    max_hop_diameter: int
    witness_component: tuple[str, ...]


@dataclass(frozen=True)
class PQReport:
    """Per-level component statistics and the trend verdict.

    verdict: 'bounded-with-D' when the finest two analyzable levels are
    non-increasing, 'growing' when the diameters strictly increase over at
    least 3 consecutive levels, 'inconclusive' otherwise.
    """

    r: float
    rows: tuple[LevelRow, ...]
    verdict: str
    D: int
    source: str
    requested_D: int | None = None
    satisfied: bool | None = None

    def as_dict(self) -> dict:
        out = {
            "r": self.r,
            "levels": [
                {
                    "k": row.k,
                    "components": row.component_count,
                    "maxHopDiameter": row.max_hop_diameter,
                    "witness": list(row.witness_component),
                }
                for row in self.rows
            ],
            "verdict": self.verdict,
            "D": self.D,
            "source": self.source,
        }
        if self.requested_D is not None:
            out["requestedD"] = self.requested_D
            out["satisfied"] = self.satisfied
        return out


@dataclass(frozen=True)
class BranchPointResult:
    """Highest-level vertex reachable from both inputs by radial geodesics."""

    pair: tuple[str, str]
    y: str
    y_level: int
    gromov_product: float
    geodesic_from_x: tuple[str, ...]
    geodesic_from_y: tuple[str, ...]
    distances: tuple[int, int, int]  # |xy|, |yx'|, |xx'|


def rh_vertex_id(point_id: str, k: int) -> str:
    return f"{point_id}@{k}"


def rips_graph(space: FiniteMetricSpace, t: Scalar) -> Graph:
    """Graph on the points of the space with an edge when d <= t (non-strict)."""
    if Fraction(t) <= 0:
        raise ValueError("Rips scale must be positive")
    mask = step_mask(space, t)
    edges = [
        (space.ids[i], space.ids[j])
        for i, j in zip(*np.nonzero(np.triu(mask, k=1)))
    ]
    return Graph(space.ids, edges)


def _check_r(r: Scalar, strict: bool = False) -> Fraction:
    rf = parse_scale(r)
    if strict:
        if not 0 < rf < MAX_RIPS_PARAMETER:
            raise ValueError("parameter must satisfy 0 < r < 1/6")
    elif not 0 < rf <= MAX_RIPS_PARAMETER:
        raise ValueError("parameter must satisfy 0 < r <= 1/6")
    return rf


def analyzable_window(space: FiniteMetricSpace, r: Scalar) -> tuple[int, int]:
    """Levels k with r^k inside [min positive distance / 2, 2 * diameter].

    Outside this window every level is structurally constant (all isolated or
    a single clique), so truncating there loses nothing.
    """
    rf = parse_scale(r)
    d_min = space.min_positive_distance()
    diam = space.diameter()
    if d_min <= 0 or diam <= 0:
        return (0, 0)
    return exponent_window(rf, Fraction(d_min) / 2, 2 * Fraction(diam))


def _resolve_window(
    space: FiniteMetricSpace, r: Fraction, k_min: int | None, k_max: int | None
) -> tuple[int, int]:
    if k_min is None or k_max is None:
        lo, hi = analyzable_window(space, r)
        k_min = lo if k_min is None else k_min
        k_max = hi if k_max is None else k_max
    if k_min > k_max:
        raise ValueError("k_min must not exceed k_max")
    return k_min, k_max


def build_rh(
    space: FiniteMetricSpace,
    r: Scalar,
    k_min: int | None = None,
    k_max: int | None = None,
) -> LeveledGraph:
    """Rips-stack approximation: one vertex per (point, level).

    Horizontal edges at level k join points at distance <= r^k; radial edges
    join (x, k) to (x', k+1) when d(x, x') <= r^k.
    """
    rf = _check_r(r)
    k_min, k_max = _resolve_window(space, rf, k_min, k_max)
    vertices: list[str] = []
    level: dict[str, int] = {}
    anchor: dict[str, str] = {}
    for k in range(k_min, k_max + 1):
        for pid in space.ids:
            vid = rh_vertex_id(pid, k)
            vertices.append(vid)
            level[vid] = k
            anchor[vid] = pid
    edges: list[tuple[str, str]] = []
    kind: dict[tuple[str, str], str] = {}
    n = space.n
    for k in range(k_min, k_max + 1):
        hmask = step_mask(space, rf**k)
        for i, j in zip(*np.nonzero(np.triu(hmask, k=1))):
            u, v = rh_vertex_id(space.ids[i], k), rh_vertex_id(space.ids[j], k)
            edges.append((u, v))
            kind[edge_key(u, v)] = "horizontal"
        if k < k_max:
            rmask = space.dist <= upper_threshold(rf**k)
            for i in range(n):
                for j in np.nonzero(rmask[i])[0]:
                    u = rh_vertex_id(space.ids[i], k)
                    v = rh_vertex_id(space.ids[int(j)], k + 1)
                    edges.append((u, v))
                    kind[edge_key(u, v)] = "radial"
    graph = Graph(vertices, edges)
    return LeveledGraph(
        graph=graph,
        space=space,
        r=rf,
        flavor="RH",
        level_range=(k_min, k_max),
        level=level,
        kind=kind,
        anchor=anchor,
    )


def _ball(space: FiniteMetricSpace, center: int, radius: Fraction) -> frozenset[str]:
    mask = space.dist[center] <= upper_threshold(radius)
    return frozenset(space.ids[i] for i in np.nonzero(mask)[0])


def build_h(
    space: FiniteMetricSpace,
    r: Scalar,
    k_min: int | None = None,
    k_max: int | None = None,
    criterion: str = "witness",
) -> LeveledGraph:
    """Ball-net approximation over greedy maximal r^k-separated centers.

    Balls are realized as subsets of the finite space at radius 2 r^k; equal
    subsets at the same level merge into one vertex. With
    ``criterion='witness'`` edge predicates are subset intersection and
    containment; ``criterion='metric'`` uses the distance tests
    d <= 4 r^k (horizontal) and d + 2 r^(k+1) <= 2 r^k (radial) instead.
    """
    if criterion not in ("witness", "metric"):
        raise ValueError("criterion must be 'witness' or 'metric'")
    rf = _check_r(r)
    k_min, k_max = _resolve_window(space, rf, k_min, k_max)

    vertices: list[str] = []
    level: dict[str, int] = {}
    anchor: dict[str, str] = {}
    balls: dict[str, frozenset[str]] = {}
    per_level: dict[int, list[str]] = {}
    for k in range(k_min, k_max + 1):
        centers = greedy_maximal_separated(space, rf**k)
        level_vertices: list[str] = []
        ball_to_vertex: dict[frozenset[str], str] = {}
        for c in centers:
            ball = _ball(space, space.index(c), 2 * rf**k)
            if ball in ball_to_vertex:
                continue  # equal subsets at the same level are one vertex
            vid = f"{c}@{k}"
            ball_to_vertex[ball] = vid
            vertices.append(vid)
            level[vid] = k
            anchor[vid] = c
            balls[vid] = ball
            level_vertices.append(vid)
        per_level[k] = level_vertices

    edges: list[tuple[str, str]] = []
    kind: dict[tuple[str, str], str] = {}
    for k in range(k_min, k_max + 1):
        vs = per_level[k]
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                u, v = vs[a], vs[b]
                if criterion == "witness":
                    touch = bool(balls[u] & balls[v])
                else:
                    touch = at_most(space.d(anchor[u], anchor[v]), 4 * rf**k)
                if touch:
                    edges.append((u, v))
                    kind[edge_key(u, v)] = "horizontal"
        if k < k_max:
            for u in per_level[k]:
                for v in per_level[k + 1]:
                    if criterion == "witness":
                        contained = balls[v] <= balls[u]
                    else:
                        gap = 2 * rf**k - 2 * rf ** (k + 1)
                        contained = at_most(space.d(anchor[u], anchor[v]), gap)
                    if contained:
                        edges.append((u, v))
                        kind[edge_key(u, v)] = "radial"
    graph = Graph(vertices, edges)
    return LeveledGraph(
        graph=graph,
        space=space,
        r=rf,
        flavor="H",
        level_range=(k_min, k_max),
        level=level,
        kind=kind,
        anchor=anchor,
        balls=balls,
    )


def classify_trend(diameters: Sequence[int]) -> str:
    """Verdict from level diameters listed coarse-to-fine."""
    d = list(diameters)
    for i in range(len(d) - 2):
        if d[i] < d[i + 1] < d[i + 2]:
            return "growing"
    if not d:
        return "inconclusive"
    if len(d) == 1 or d[-2] >= d[-1]:
        return "bounded-with-D"
    return "inconclusive"


def level_component_analysis(leveled: LeveledGraph) -> PQReport:
    """Components and hop diameters of each level's horizontal subgraph."""
    rows: list[LevelRow] = []
    for k in leveled.levels():
        sub = leveled.horizontal_subgraph(k)
        seen: set[str] = set()
        comps: list[list[str]] = []
        for v in sub.vertex_ids:
            if v in seen:
                continue
            row = sub._bfs_row(sub.index(v))
            members = [sub.vertex_ids[i] for i in np.nonzero(np.isfinite(row))[0]]
            seen.update(members)
            comps.append(members)
        best_diam, witness = 0, tuple(comps[0]) if comps else ()
        for members in comps:
            diam = sub.induced(members).hop_diameter()
            if diam > best_diam:
                best_diam, witness = diam, tuple(members)
        rows.append(
            LevelRow(
                k=k,
                component_count=len(comps),
                max_hop_diameter=best_diam,
                witness_component=witness,
            )
        )
    diameters = [row.max_hop_diameter for row in rows]
    return PQReport(
        r=float(leveled.r),
        rows=tuple(rows),
        verdict=classify_trend(diameters),
        D=max(diameters, default=0),
        source=f"{leveled.flavor} level analysis"
        + ("" if leveled.flavor == "RH" else " (informational for H)"),
    )


def descending_reach(leveled: LeveledGraph, vertex: str) -> dict[int, np.ndarray]:
    """Point sets reachable from a vertex by strictly descending radial paths.

    reach[m] is a boolean vector over the space's points: q is set when some
    radial path walks from the vertex down to (q, m), one level per edge.
    """
    if leveled.flavor != "RH":
        raise ValueError("descending reach is defined for RH")
    space = leveled.space
    k = leveled.level[vertex]
    k_min = leveled.level_range[0]
    reach: dict[int, np.ndarray] = {}
    current = np.zeros(space.n, dtype=bool)
    current[space.index(leveled.anchor[vertex])] = True
    reach[k] = current
    r = leveled.r
    for m in range(k - 1, k_min - 1, -1):
        nxt = space.dist[current].min(axis=0) <= upper_threshold(r**m)
        reach[m] = nxt
        current = nxt
    return reach


def _branch_level(
    reach_x: dict[int, np.ndarray], reach_y: dict[int, np.ndarray], k_min: int, top: int
) -> tuple[int, int] | None:
    """Highest level with a common reachable point; returns (level, point index)."""
    for m in range(top, k_min - 1, -1):
        common = reach_x[m] & reach_y[m]
        idx = np.nonzero(common)[0]
        if idx.size:
            return m, int(idx[0])
    return None


def _radial_geodesic(
    leveled: LeveledGraph, reach: dict[int, np.ndarray], vertex: str, q: int, m: int
) -> tuple[str, ...]:
    """Reconstruct one descending radial geodesic from a vertex to (q, m)."""
    space = leveled.space
    r = leveled.r
    k = leveled.level[vertex]
    path_points = [q]
    current = q
    for level_ in range(m, k):
        # predecessor at level_+1 whose step down to `current` is allowed
        thresh = upper_threshold(r**level_)
        cands = np.nonzero(reach[level_ + 1] & (space.dist[:, current] <= thresh))[0]
        current = int(cands[0])
        path_points.append(current)
    path_points.reverse()  # now from the vertex level down to m
    return tuple(
        rh_vertex_id(space.ids[p], k - i) for i, p in enumerate(path_points)
    )


def branch_point(leveled: LeveledGraph, x: str, y: str) -> BranchPointResult:
    """Branch point of a vertex pair: the maximal-level common cone point.

    Both inputs are connected to the result by radial geodesics (descending
    one level per edge); the Gromov product is computed from graph distances.
    Raises RangeExhausted when no cone point exists inside the level window.
    """
    if leveled.flavor != "RH":
        raise ValueError("branch_point is defined for RH")
    leveled.graph.index(x), leveled.graph.index(y)
    k_min, _ = leveled.level_range
    reach_x = descending_reach(leveled, x)
    reach_y = descending_reach(leveled, y)
    top = min(leveled.level[x], leveled.level[y])
    hit = _branch_level(reach_x, reach_y, k_min, top)
    if hit is None:
        raise RangeExhaustedError(
            f"no cone point for ({x}, {y}) above level {k_min}; widen the level range"
        )
    m, q = hit
    y_vertex = rh_vertex_id(leveled.space.ids[q], m)
    d = leveled.graph.distances()
    ix, iy, iq = (leveled.graph.index(v) for v in (x, y, y_vertex))
    dxq, dyq, dxy = int(d[ix, iq]), int(d[iy, iq]), int(d[ix, iy])
    product = (dxq + dyq - dxy) / 2.0
    return BranchPointResult(
        pair=(x, y),
        y=y_vertex,
        y_level=m,
        gromov_product=product,
        geodesic_from_x=_radial_geodesic(leveled, reach_x, x, q, m),
        geodesic_from_y=_radial_geodesic(leveled, reach_y, y, q, m),
        distances=(dxq, dyq, dxy),
    )


@dataclass(frozen=True)
class DistortionReport:
    """Additive distortion of the level-preserving comparison map RH -> H."""

    max_distortion: int
    interior_pairs: int
    total_pairs: int
    out_of_range_pairs: int
    witness: tuple[str, str] | None
    codensity: int
    level_range: tuple[int, int]

    def as_dict(self) -> dict:
        return {
            "maxAdditiveDistortion": self.max_distortion,
            "interiorPairs": self.interior_pairs,
            "totalPairs": self.total_pairs,
            "outOfRangePairs": self.out_of_range_pairs,
            "witness": list(self.witness) if self.witness else None,
            "codensity": self.codensity,
            "levels": list(self.level_range),
        }


def comparison_map(rh: LeveledGraph, h: LeveledGraph) -> dict[str, str]:
    """RH vertex -> the first same-level H vertex whose ball contains the point."""
    out: dict[str, str] = {}
    per_level: dict[int, list[str]] = {}
    for v in h.graph.vertex_ids:
        per_level.setdefault(h.level[v], []).append(v)
    for v in rh.graph.vertex_ids:
        pid, k = rh.anchor[v], rh.level[v]
        target = next(
            (w for w in per_level.get(k, []) if pid in h.balls[w]), None
        )
        if target is None:  # maximality of the net guarantees a containing ball
            raise AssertionError(f"no level-{k} ball contains point {pid}")
        out[v] = target
    return out


def rh_to_h_distortion(
    space: FiniteMetricSpace,
    r: Scalar,
    k_min: int | None = None,
    k_max: int | None = None,
) -> DistortionReport:
    """Max | |xx'|_RH - |F(x)F(x')|_H | over interior vertex pairs.

    Interior pairs are those whose branch point lies strictly inside the level
    window; pairs with no in-window cone point are skipped and counted.
    """
    rf = _check_r(r)
    k_min, k_max = _resolve_window(space, rf, k_min, k_max)
    rh = build_rh(space, rf, k_min, k_max)
    h = build_h(space, rf, k_min, k_max)
    fmap = comparison_map(rh, h)
    d_rh = rh.graph.distances()
    d_h = h.graph.distances()
    reaches = {v: descending_reach(rh, v) for v in rh.graph.vertex_ids}

    ids = rh.graph.vertex_ids
    max_dist, witness = 0, None
    interior = out_of_range = total = 0
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            total += 1
            x, y = ids[i], ids[j]
            top = min(rh.level[x], rh.level[y])
            hit = _branch_level(reaches[x], reaches[y], k_min, top)
            if hit is None:
                out_of_range += 1
                continue
            if not (k_min < hit[0] < k_max):
                continue
            interior += 1
            dd = abs(
                int(d_rh[i, j]) - int(d_h[h.graph.index(fmap[x]), h.graph.index(fmap[y])])
            )
            if dd > max_dist:
                max_dist, witness = dd, (x, y)
    # every H vertex is within 1 of the image of any RH vertex of its ball
    image = sorted({fmap[v] for v in ids})
    image_idx = [h.graph.index(v) for v in image]
    codensity = int(d_h[image_idx].min(axis=0).max()) if image_idx else 0
    return DistortionReport(
        max_distortion=max_dist,
        interior_pairs=interior,
        total_pairs=total,
        out_of_range_pairs=out_of_range,
        witness=witness,
        codensity=codensity,
        level_range=(k_min, k_max),
    )


def pq_detector(space: FiniteMetricSpace, r: Scalar, D: int | None = None) -> PQReport:
    """Scan chain connectivity at scales r^k across the analyzable window.

    Levels k run over scales r^k between the minimum positive distance and the
    diameter. The verdict is 'bounded-with-D' when the per-level maximum hop
    diameters stop growing at the finest scales, 'growing' when they strictly
    increase over three consecutive levels. When a hop bound D is supplied the
    report also states whether every analyzed level satisfies it.
    """
    rf = _check_r(r, strict=True)
    d_min = space.min_positive_distance()
    diam = space.diameter()
    if space.n <= 1 or d_min <= 0:
        row = LevelRow(k=0, component_count=space.n, max_hop_diameter=0, witness_component=tuple(space.ids))
        return PQReport(
            r=float(rf), rows=(row,), verdict="bounded-with-D", D=0,
            source="pq detector", requested_D=D, satisfied=True,
        )
    k_lo, k_hi = exponent_window(rf, Fraction(d_min), Fraction(diam))
    rows: list[LevelRow] = []
    for k in range(k_lo, k_hi + 1):
        report = d_finitely_connected(space, rf**k, D if D is not None else space.n)
        worst: ComponentHops = max(report.components, key=lambda c: c.max_hops)
        rows.append(
            LevelRow(
                k=k,
                component_count=len(report.components),
                max_hop_diameter=report.max_hops,
                witness_component=worst.members,
            )
        )
    diameters = [row.max_hop_diameter for row in rows]
    d_star = max(diameters, default=0)
    return PQReport(
        r=float(rf),
        rows=tuple(rows),
        verdict=classify_trend(diameters),
        D=d_star,
        source="pq detector",
        requested_D=D,
        satisfied=None if D is None else d_star <= D,
    )
