"""Tree quotients of coned graph complexes.

Pipeline: bound the generating loop length, rescale the vertex function so
adjacent-ball value spread stays below 1/4, cone every closed 3L-ball over a
maximal L-separated center set (killing short cycles), nudge vertex values off
the integers, cut the complex along the integer level sets (tracks), and smash
track complements to points. On a complex built here the quotient is a tree
and the projection is a quasi-isometry, which the pipeline certifies
empirically.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from coarseforest.errors import DisconnectedGraphError, NotATreeError
from coarseforest.graph import (
    ExpansionProfile,
    Graph,
    PropernessProfile,
    QIReport,
    edge_key,
    expansion_profile,
    properness_profile,
    qi_estimate,
)
from coarseforest.metric import FiniteMetricSpace
from coarseforest.union_find import UnionFind

PERTURB_MARGIN = 0.125  # shift values this far off the integers; < 1/4


def cone_vertex_id(center: str) -> str:
    return f"cone:{center}"


@dataclass
class ConedComplex:
    """A unit-edge base graph with every closed R-ball coned to a point.

    Cone edges have length R = 3L; triangles (cone, u, w) exist for every base
    edge inside the coned ball. Any base cycle of length <= L lies inside some
    coned ball, so the complex is simply connected when L bounds a generating
    set of cycles.
    """

    base: Graph
    A: tuple[str, ...]
    L: int
    R: int
    cone_edges: tuple[tuple[str, str], ...]
    triangles: tuple[tuple[str, str, str], ...]
    from_pipeline: bool = True

    @cached_property
    def skeleton(self) -> Graph:
        ids = list(self.base.vertex_ids) + [cone_vertex_id(a) for a in self.A]
        edges = [(u, v, w) for u, v, w in self.base.edges]
        edges += [(c, u, float(self.R)) for c, u in self.cone_edges]
        return Graph(ids, edges)

    @property
    def cone_vertices(self) -> tuple[str, ...]:
        return tuple(cone_vertex_id(a) for a in self.A)


@dataclass(frozen=True)
class PerturbedFunction:
    """Vertex values pushed off the integers by at most PERTURB_MARGIN.

    Cone vertices copy their center's value, so no vertex value is an integer.
    """

    values: dict[str, float]
    max_shift: float

    def __getitem__(self, vertex: str) -> float:
        return self.values[vertex]


@dataclass
class TrackSystem:
    """Integer-level crossings on skeleton edges, joined through triangles.

    A crossing is keyed by (edge key, integer level) and carries the affine
    parameter t in (0, 1) measured from the smaller edge endpoint. Components
    of the join relation are the tracks; their two incident regions are filled
    in by :func:`quotient`.
    """

    crossings: dict[tuple[tuple[str, str], int], float]
    component_of: dict[tuple[tuple[str, str], int], str]
    components: dict[str, tuple[tuple[tuple[str, str], int], ...]]
    incident_regions: dict[str, tuple[str, str]] = field(default_factory=dict)


@dataclass
class QuotientTree:
    """The smashed quotient: regions become vertices, tracks become edges."""

    tree: Graph
    pi: dict[str, str]  # Y-vertex -> tree vertex
    edge_of_track: dict[str, tuple[str, str]]
    representative: dict[str, str]  # tree vertex -> Y-vertex or segment key
    region_members: dict[str, tuple[str, ...]]  # tree vertex -> Y-vertices inside


def _bfs_tree(graph: Graph, root: int) -> tuple[np.ndarray, np.ndarray]:
    parent = np.full(graph.n, -1, dtype=int)
    depth = np.full(graph.n, -1, dtype=int)
    depth[root] = 0
    order = [root]
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v, _ in graph._adj[u]:
            if depth[v] < 0:
                depth[v] = depth[u] + 1
                parent[v] = u
                order.append(v)
    return parent, depth


def _tree_path_edges(graph: Graph, parent: np.ndarray, depth: np.ndarray, a: int, b: int) -> int:
    """Bitmask of edge indices along the tree path between two vertices."""
    mask = 0
    while a != b:
        if depth[a] < depth[b]:
            a, b = b, a
        mask ^= 1 << graph._edge_index[edge_key(graph.vertex_ids[a], graph.vertex_ids[parent[a]])]
        a = parent[a]
    return mask


def loop_bound(graph: Graph) -> int:
    """Length of the longest cycle in a short generating basis of the cycle space.

    Candidate cycles are shortest-path cycles through each (root, edge) pair
    plus the BFS fundamental cycles; a greedy GF(2) elimination keeps the
    shortest independent ones. 0 when the graph is acyclic. Requires a
    connected unit-edge graph.
    """
    if not graph.is_connected():
        raise DisconnectedGraphError("loop_bound requires a connected graph")
    if not graph.unit_lengths:
        raise ValueError("loop_bound expects unit edge lengths")
    rank = len(graph.edges) - graph.n + 1
    if rank <= 0:
        return 0
    trees = [_bfs_tree(graph, root) for root in range(graph.n)]
    candidates: set[int] = set()
    for root in range(graph.n):
        parent, depth = trees[root]
        for u, v, _ in graph.edges:
            a, b = graph.index(u), graph.index(v)
            if parent[a] == b or parent[b] == a:
                continue  # tree edge for this root
            mask = (
                _tree_path_edges(graph, parent, depth, root, a)
                ^ _tree_path_edges(graph, parent, depth, root, b)
                ^ (1 << graph._edge_index[edge_key(u, v)])
            )
            if mask:
                candidates.add(mask)
    basis: dict[int, int] = {}  # leading bit -> reduced vector
    best = 0
    for mask in sorted(candidates, key=lambda m: (m.bit_count(), m)):
        reduced = mask
        while reduced:
            lead = reduced.bit_length() - 1
            if lead not in basis:
                basis[lead] = reduced
                best = max(best, mask.bit_count())
                break
            reduced ^= basis[lead]
        if len(basis) == rank:
            return best
    raise AssertionError("cycle candidates failed to span the cycle space")


def rescale(f: Mapping[str, float], graph: Graph, L: int) -> tuple[dict[str, float], float]:
    """Scale f so its spread over distance-L pairs drops below 1/4.

    c = 1 / (5 * max(rho(L), 1)) with rho the expansion profile at threshold
    max(L, 1); returns (c * f, c).
    """
    threshold = max(L, 1)
    rho = expansion_profile(graph, f, [threshold]).value(threshold)
    c = 1.0 / (5.0 * max(rho, 1.0))
    return {v: c * float(f[v]) for v in graph.vertex_ids}, c


def cone_complex(graph: Graph, L: int) -> ConedComplex:
    """Cone every closed 3L-ball around a greedy maximal L-separated set."""
    if L < 1:
        raise ValueError("cone_complex requires L >= 1")
    if not graph.is_connected():
        raise DisconnectedGraphError("cone_complex requires a connected graph")
    d = graph.distances()
    centers: list[int] = []
    for i in range(graph.n):
        if all(d[i, c] >= L for c in centers):
            centers.append(i)
    R = 3 * L
    cone_edges: list[tuple[str, str]] = []
    triangles: list[tuple[str, str, str]] = []
    for c in centers:
        cid = cone_vertex_id(graph.vertex_ids[c])
        ball = d[c] <= R
        for u in np.nonzero(ball)[0]:
            cone_edges.append((cid, graph.vertex_ids[int(u)]))
        for u, v, _ in graph.edges:
            if ball[graph.index(u)] and ball[graph.index(v)]:
                triangles.append((cid, u, v))
    return ConedComplex(
        base=graph,
        A=tuple(graph.vertex_ids[c] for c in centers),
        L=L,
        R=R,
        cone_edges=tuple(cone_edges),
        triangles=tuple(triangles),
    )


def _shift_off_integers(x: float) -> float:
    """Move x to distance >= PERTURB_MARGIN from the integers; ties shift up."""
    nearest = round(x)
    gap = x - nearest
    if abs(gap) >= PERTURB_MARGIN:
        return x
    if gap >= 0:  # includes the tie x == nearest
        return nearest + PERTURB_MARGIN
    return nearest - PERTURB_MARGIN


def perturb(coned: ConedComplex, f: Mapping[str, float]) -> PerturbedFunction:
    """Push base values off the integers; cone vertices copy their center."""
    values: dict[str, float] = {}
    max_shift = 0.0
    for v in coned.base.vertex_ids:
        shifted = _shift_off_integers(float(f[v]))
        values[v] = shifted
        max_shift = max(max_shift, abs(shifted - float(f[v])))
    for a in coned.A:
        values[cone_vertex_id(a)] = values[a]
    return PerturbedFunction(values=values, max_shift=max_shift)


def _edge_crossings(f0: float, f1: float) -> list[int]:
    lo, hi = min(f0, f1), max(f0, f1)
    return list(range(math.floor(lo) + 1, math.ceil(hi)))


def extract_tracks(coned: ConedComplex, fp: PerturbedFunction) -> TrackSystem:
    """Enumerate integer crossings per edge and join them through triangles.

    Within a triangle each crossed integer level meets exactly two of the
    three edges (corner values avoid the integers); those two crossings are
    identified. Crossings on an edge shared by two triangles are one object,
    so the join relation closes across chains of triangles.
    """
    skeleton = coned.skeleton
    crossings: dict[tuple[tuple[str, str], int], float] = {}
    for u, v, _ in skeleton.edges:
        key = edge_key(u, v)
        f0, f1 = fp[key[0]], fp[key[1]]
        for n in _edge_crossings(f0, f1):
            crossings[(key, n)] = (n - f0) / (f1 - f0)
    uf = UnionFind(crossings.keys())
    for tri in coned.triangles:
        keys = [edge_key(tri[0], tri[1]), edge_key(tri[0], tri[2]), edge_key(tri[1], tri[2])]
        corner_lo = min(fp[v] for v in tri)
        corner_hi = max(fp[v] for v in tri)
        for n in range(math.floor(corner_lo) + 1, math.ceil(corner_hi)):
            hit = [k for k in keys if (k, n) in crossings]
            if not hit:
                continue
            if len(hit) != 2:
                raise AssertionError(
                    f"level {n} crosses {len(hit)} edges of triangle {tri}"
                )
            uf.union((hit[0], n), (hit[1], n))
    groups = uf.groups()
    component_of: dict[tuple[tuple[str, str], int], str] = {}
    components: dict[str, tuple] = {}
    for index, root in enumerate(sorted(groups, key=lambda r: min(groups[r]))):
        label = f"tr{index}"
        members = tuple(groups[root])
        components[label] = members
        for m in members:
            component_of[m] = label
    return TrackSystem(
        crossings=crossings, component_of=component_of, components=components
    )


def _provenance(coned: ConedComplex) -> str:
    if coned.from_pipeline:
        return " (internal error: pipeline complexes are simply connected)"
    return " (externally supplied complex is likely not simply connected)"


def _segment_key(key: tuple[str, str], index: int) -> tuple:
    return ("s", key, index)


def _vertex_key(vertex: str) -> tuple:
    return ("v", vertex)


def quotient(
    coned: ConedComplex, fp: PerturbedFunction, tracks: TrackSystem
) -> QuotientTree:
    """Smash track complements to points and tracks to edges.

    Regions are unions of edge segments (pieces between consecutive
    crossings): segments sharing a Y-vertex are joined, and segments of a
    common triangle lying in the same integer band are joined (the band's
    preimage inside a triangle is convex, hence connected). Raises NotATree
    when the quotient carries a cycle, which signals a non-simply-connected
    input when the complex was supplied externally.
    """
    skeleton = coned.skeleton
    per_edge: dict[tuple[str, str], list[tuple[float, int]]] = {}
    for (key, n), t in tracks.crossings.items():
        per_edge.setdefault(key, []).append((t, n))
    for items in per_edge.values():
        items.sort()

    uf = UnionFind()

    def band_of_segment(key: tuple[str, str], index: int) -> int:
        f0, f1 = fp[key[0]], fp[key[1]]
        cuts = per_edge.get(key, [])
        t_lo = cuts[index - 1][0] if index > 0 else 0.0
        t_hi = cuts[index][0] if index < len(cuts) else 1.0
        mid = f0 + (f1 - f0) * (t_lo + t_hi) / 2.0
        return math.floor(mid)

    segment_band: dict[tuple, int] = {}
    for u, v, _ in skeleton.edges:
        key = edge_key(u, v)
        cuts = per_edge.get(key, [])
        for index in range(len(cuts) + 1):
            seg = _segment_key(key, index)
            uf.add(seg)
            segment_band[seg] = band_of_segment(key, index)
        uf.union(_vertex_key(key[0]), _segment_key(key, 0))
        uf.union(_vertex_key(key[1]), _segment_key(key, len(cuts)))
    for vertex in skeleton.vertex_ids:
        uf.add(_vertex_key(vertex))

    for tri in coned.triangles:
        keys = [edge_key(tri[0], tri[1]), edge_key(tri[0], tri[2]), edge_key(tri[1], tri[2])]
        by_band: dict[int, list[tuple]] = {}
        for key in keys:
            for index in range(len(per_edge.get(key, [])) + 1):
                seg = _segment_key(key, index)
                by_band.setdefault(segment_band[seg], []).append(seg)
        for segs in by_band.values():
            for other in segs[1:]:
                uf.union(segs[0], other)

    groups = uf.groups()
    region_label: dict = {}
    region_members: dict[str, list[str]] = {}
    representative: dict[str, str] = {}
    for index, root in enumerate(sorted(groups, key=lambda r: min(groups[r]))):
        label = f"t{index}"
        members = groups[root]
        region_label[root] = label
        inside = sorted(m[1] for m in members if m[0] == "v")
        region_members[label] = inside
        representative[label] = inside[0] if inside else repr(min(members))

    def region_of(key) -> str:
        return region_label[uf.find(key)]

    edge_of_track: dict[str, tuple[str, str]] = {}
    tree_edges: dict[tuple[str, str], str] = {}
    for label in sorted(tracks.components):
        sides: set[tuple[str, str]] = set()
        for key, n in tracks.components[label]:
            index = per_edge[key].index(((tracks.crossings[(key, n)]), n))
            below = region_of(_segment_key(key, index))
            above = region_of(_segment_key(key, index + 1))
            sides.add((below, above) if below <= above else (above, below))
        if len(sides) != 1:
            raise AssertionError(f"track {label} borders inconsistent regions {sides}")
        pair = sides.pop()
        if pair[0] == pair[1]:
            raise NotATreeError(
                f"track {label} does not separate its neighborhood{_provenance(coned)}"
            )
        if pair in tree_edges:
            raise NotATreeError(
                f"tracks {tree_edges[pair]} and {label} join the same regions {pair}"
                + _provenance(coned)
            )
        tree_edges[pair] = label
        edge_of_track[label] = pair
        tracks.incident_regions[label] = pair

    labels = sorted(region_members)
    tree = Graph(labels, [(a, b) for a, b in tree_edges])
    if skeleton.n and not tree.is_connected():
        raise AssertionError("quotient of a connected complex must be connected")
    if len(tree.edges) != tree.n - 1:
        raise NotATreeError(
            f"quotient has {len(tree.edges)} edges on {tree.n} regions; a cycle survived"
            + _provenance(coned)
        )
    pi = {v: region_of(_vertex_key(v)) for v in skeleton.vertex_ids}
    return QuotientTree(
        tree=tree,
        pi=pi,
        edge_of_track=edge_of_track,
        representative=representative,
        region_members={k: tuple(v) for k, v in region_members.items()},
    )


@dataclass
class PipelineResult:
    """Everything a tree-quotient run produces, plus timings and constants."""

    coned: ConedComplex
    perturbed: PerturbedFunction
    tracks: TrackSystem
    quotient: QuotientTree
    qi: QIReport
    L: int
    R: int
    scale: float
    expansion: ExpansionProfile
    properness: PropernessProfile
    timings: dict[str, float]

    @property
    def tree(self) -> Graph:
        return self.quotient.tree

    def manifest(self) -> dict:
        return {
            "stages": self.timings,
            "constants": {"L": self.L, "R": self.R, "scale": self.scale},
            "counts": {
                "baseVertices": self.coned.base.n,
                "coneVertices": len(self.coned.A),
                "triangles": len(self.coned.triangles),
                "crossings": len(self.tracks.crossings),
                "tracks": len(self.tracks.components),
                "treeVertices": self.tree.n,
                "treeEdges": len(self.tree.edges),
            },
            "qi": self.qi.as_dict(),
            "maxPerturbation": self.perturbed.max_shift,
        }


def treeify_pipeline(
    graph: Graph,
    f: Mapping[str, float],
    sample_budget: int = 250_000,
    seed: int = 0,
    L: int | None = None,
) -> PipelineResult:
    """Run loop bound, rescale, cone, perturb, track extraction and quotient.

    The QI report for the projection samples base vertices only (cone vertices
    sit within R of the base). A user-supplied L is trusted when given.
    """
    timings: dict[str, float] = {}

    def stage(name: str, fn):
        start = time.perf_counter()
        out = fn()
        timings[name] = time.perf_counter() - start
        return out

    bound = stage("loop_bound", lambda: loop_bound(graph)) if L is None else L
    scaled, c = stage("rescale", lambda: rescale(f, graph, bound))
    coned = stage("cone_complex", lambda: cone_complex(graph, max(bound, 1)))
    perturbed = stage("perturb", lambda: perturb(coned, scaled))
    tracks = stage("extract_tracks", lambda: extract_tracks(coned, perturbed))
    quo = stage("quotient", lambda: quotient(coned, perturbed, tracks))
    qi = stage(
        "qi_estimate",
        lambda: qi_estimate(
            quo.pi,
            coned.skeleton,
            quo.tree,
            sample_budget=sample_budget,
            seed=seed,
            restrict_to=graph.vertex_ids,
        ),
    )
    thresholds = list(range(1, max(bound, 1) + 1))
    diag_expansion = expansion_profile(graph, f, thresholds)
    diag_properness = properness_profile(graph, f, half_width=1.0, band_step=1.0)
    return PipelineResult(
        coned=coned,
        perturbed=perturbed,
        tracks=tracks,
        quotient=quo,
        qi=qi,
        L=bound,
        R=coned.R,
        scale=c,
        expansion=diag_expansion,
        properness=diag_properness,
        timings=timings,
    )


def treeify_metric(
    space: FiniteMetricSpace,
    f: Mapping[str, float],
    R: float | None = None,
    sample_budget: int = 250_000,
    seed: int = 0,
) -> PipelineResult:
    """Metric-space entry point: discretize through the ball net first."""
    from coarseforest.gamma import build_gamma, induce_hat_f

    radius = R if R is not None else space.min_positive_distance()
    gamma = build_gamma(space, radius)
    if not gamma.graph.is_connected():
        raise DisconnectedGraphError(
            "ball net is disconnected at this radius; increase R"
        )
    f_hat = induce_hat_f(gamma, f)
    return treeify_pipeline(gamma.graph, f_hat, sample_budget=sample_budget, seed=seed)
