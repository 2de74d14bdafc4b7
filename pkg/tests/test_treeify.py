from __future__ import annotations

import math

import numpy as np
import pytest

from coarseforest.errors import DisconnectedGraphError, NotATreeError
from coarseforest.graph import (
    Graph,
    cycle_graph,
    four_point_delta,
    grid_graph,
    ladder_graph,
    path_graph,
)
from coarseforest.treeify import (
    PERTURB_MARGIN,
    cone_complex,
    cone_vertex_id,
    extract_tracks,
    loop_bound,
    perturb,
    quotient,
    rescale,
    treeify_metric,
    treeify_pipeline,
    _shift_off_integers,
)
from oracles import four_point_scan


def rung_f(graph: Graph) -> dict[str, float]:
    return {v: float(int(v[:2])) for v in graph.vertex_ids}


def identity_f(graph: Graph) -> dict[str, float]:
    return {v: float(v) for v in graph.vertex_ids}


def fundamental_cycle_lengths(graph: Graph) -> list[int]:
    """Oracle: BFS tree from vertex 0, cycle length per non-tree edge."""
    from collections import deque

    parent = {graph.vertex_ids[0]: None}
    depth = {graph.vertex_ids[0]: 0}
    queue = deque([graph.vertex_ids[0]])
    while queue:
        u = queue.popleft()
        for v in graph.neighbors(u):
            if v not in depth:
                depth[v] = depth[u] + 1
                parent[v] = u
                queue.append(v)
    tree_edges = {frozenset((v, p)) for v, p in parent.items() if p is not None}
    lengths = []
    for u, v, _ in graph.edges:
        if frozenset((u, v)) in tree_edges:
            continue
        ancestors_u = []
        a = u
        while a is not None:
            ancestors_u.append(a)
            a = parent[a]
        b, upward = v, 0
        while b not in ancestors_u:
            b = parent[b]
            upward += 1
        lengths.append(ancestors_u.index(b) + upward + 1)
    return lengths


def test_loop_bound_examples():
    assert loop_bound(path_graph(9)) == 0
    assert loop_bound(cycle_graph(8)) == 8
    assert loop_bound(grid_graph(5, 5)) == 4
    assert loop_bound(ladder_graph(16)) == 4
    with pytest.raises(DisconnectedGraphError):
        loop_bound(Graph(["a", "b"], []))


def test_loop_bound_upper_bounded_by_fundamental_basis():
    for graph in (grid_graph(4, 6), ladder_graph(8), cycle_graph(12)):
        assert loop_bound(graph) <= max(fundamental_cycle_lengths(graph))


def test_rescale_examples():
    p9 = path_graph(9)
    scaled, c = rescale({v: 4.0 for v in p9.vertex_ids}, p9, 1)
    assert c == 0.2 and set(scaled.values()) == {0.8}

    scaled, c = rescale(identity_f(p9), p9, 1)
    assert c == 0.2
    assert scaled["5"] == 1.0

    lad = ladder_graph(16)
    _, c = rescale(rung_f(lad), lad, 4)
    assert c == 1.0 / 20.0


def test_cone_complex_single_vertex():
    single = Graph(["v"], [])
    coned = cone_complex(single, 1)
    assert coned.A == ("v",)
    assert coned.cone_edges == ((cone_vertex_id("v"), "v"),)
    assert coned.triangles == ()
    assert coned.skeleton.n == 2


def test_cone_complex_c8_whole_ball():
    c8 = cycle_graph(8)
    coned = cone_complex(c8, 8)
    assert coned.A == ("0",)
    assert coned.R == 24
    assert len(coned.cone_edges) == 8
    assert len(coned.triangles) == 8


def test_cone_complex_path9():
    coned = cone_complex(path_graph(9), 1)
    assert coned.A == tuple(str(i) for i in range(9))
    assert coned.R == 3
    ball0 = {v for c, v in coned.cone_edges if c == cone_vertex_id("0")}
    assert ball0 == {"0", "1", "2", "3"}


def test_cone_complex_covers_short_cycles():
    g5 = grid_graph(5, 5)
    L = loop_bound(g5)
    coned = cone_complex(g5, L)
    d = g5.distances()
    covered = set()
    for cid, u, v in coned.triangles:
        covered.add(frozenset((u, v)))
    for u, v, _ in g5.edges:  # every base edge lies inside some coned ball
        assert frozenset((u, v)) in covered


def test_perturb_values():
    assert _shift_off_integers(0.5) == 0.5
    assert _shift_off_integers(3.0) == 3.125
    assert _shift_off_integers(2.95) == 2.875
    assert _shift_off_integers(2.05) == 2.125


def test_perturb_guarantees():
    rng = np.random.default_rng(9)
    p9 = path_graph(9)
    coned = cone_complex(p9, 1)
    f = {v: float(rng.uniform(-3, 3)) for v in p9.vertex_ids}
    fp = perturb(coned, f)
    assert fp.max_shift <= PERTURB_MARGIN
    for v in coned.skeleton.vertex_ids:
        assert fp[v] != round(fp[v])
    for a in coned.A:
        assert fp[cone_vertex_id(a)] == fp[a]


def test_extract_tracks_per_edge():
    two = Graph(["a", "b"], [("a", "b")])
    coned = cone_complex(two, 1)

    fp_none = perturb(coned, {"a": 0.5, "b": 0.75})
    assert len(extract_tracks(coned, fp_none).crossings) == 0

    fp_two = perturb(coned, {"a": 0.5, "b": 2.5})
    levels = {n for (_, n) in extract_tracks(coned, fp_two).crossings}
    assert levels == {1, 2}


def test_extract_tracks_triangle_join():
    triangle = Graph(["a", "b", "c"], [("a", "b"), ("b", "c"), ("a", "c")])
    coned = cone_complex(triangle, 3)
    fp = perturb(coned, {"a": 0.5, "b": 1.5, "c": 1.75})
    tracks = extract_tracks(coned, fp)
    level1 = [key for key in tracks.crossings if key[1] == 1]
    # level 1 separates corner a from b and c on every incident simplex
    components = {tracks.component_of[key] for key in level1}
    assert len(components) == 1


def test_quotient_path9_band_count():
    p9 = path_graph(9)
    result = treeify_pipeline(p9, identity_f(p9))
    values = [result.perturbed[v] for v in p9.vertex_ids]
    crossed = {n for lo, hi in zip(values, values[1:]) for n in range(math.floor(min(lo, hi)) + 1, math.ceil(max(lo, hi)))}
    assert len(result.tree.edges) == len(crossed) == 1
    assert result.tree.n == 2
    # vertices in value order map to a monotone walk along the path tree
    order = [result.quotient.pi[str(i)] for i in range(9)]
    assert order == sorted(order)


def test_quotient_single_vertex():
    single = Graph(["v"], [])
    result = treeify_pipeline(single, {"v": 0.0})
    assert result.tree.n == 1 and not result.tree.edges


def test_quotient_detects_cycle_without_cones():
    # externally supplied complex with no triangles: the cycle survives
    from coarseforest.treeify import ConedComplex

    c8 = cycle_graph(8)
    bare = ConedComplex(
        base=c8, A=(), L=1, R=3, cone_edges=(), triangles=(), from_pipeline=False
    )
    f = {v: 0.3 * float(v) for v in c8.vertex_ids}
    fp = perturb(bare, f)
    tracks = extract_tracks(bare, fp)
    with pytest.raises(NotATreeError):
        quotient(bare, fp, tracks)


def test_pipeline_c8_constant():
    c8 = cycle_graph(8)
    result = treeify_pipeline(c8, {v: 0.0 for v in c8.vertex_ids})
    assert result.tree.n == 1
    assert not result.tree.edges
    assert result.L == 8


def test_pipeline_invariants_ladder():
    lad = ladder_graph(16)
    result = treeify_pipeline(lad, rung_f(lad))
    assert result.scale * 4.0 < 0.25  # scaled expansion over loop length
    assert result.perturbed.max_shift <= PERTURB_MARGIN
    tree = result.tree
    assert tree.is_connected()
    assert len(tree.edges) == tree.n - 1
    for label, members in result.tracks.components.items():
        pair = result.tracks.incident_regions[label]
        assert pair[0] != pair[1]
    # pi is surjective onto tree vertices that contain complex vertices;
    # every tree vertex has a nonempty preimage among vertices or segments
    assert set(result.quotient.pi.values()) <= set(tree.vertex_ids)
    for v in tree.vertex_ids:
        assert v in result.quotient.representative


def test_pipeline_ladder32_two_bands():
    lad = ladder_graph(32)
    result = treeify_pipeline(lad, rung_f(lad))
    assert result.tree.n == 2
    assert len(result.tree.edges) == 1
    assert four_point_delta(result.tree) == 0.0


def test_pipeline_tree_always_acyclic():
    cases = [
        (path_graph(9), identity_f(path_graph(9))),
        (cycle_graph(8), {v: 0.0 for v in cycle_graph(8).vertex_ids}),
        (grid_graph(5, 5), {v: float(v.split(",")[1]) for v in grid_graph(5, 5).vertex_ids}),
    ]
    for graph, f in cases:
        result = treeify_pipeline(graph, f)
        tree = result.tree
        assert tree.is_connected()
        assert len(tree.edges) == tree.n - 1
        d = tree.distances()
        assert four_point_scan(d) == 0.0


def test_pipeline_qi_constants_path9():
    p9 = path_graph(9)
    result = treeify_pipeline(p9, identity_f(p9))
    assert result.qi.lam <= 5.0 / result.scale
    assert result.qi.codensity == 0.0


def test_pipeline_manifest_fields():
    p9 = path_graph(9)
    manifest = treeify_pipeline(p9, identity_f(p9)).manifest()
    assert manifest["constants"]["R"] == 3
    assert manifest["counts"]["treeVertices"] == 2
    assert "loop_bound" in manifest["stages"]


def test_pipeline_random_graphs_always_tree():
    rng = np.random.default_rng(0)
    for _ in range(15):
        n = int(rng.integers(5, 22))
        ids = [str(i) for i in range(n)]
        edges = {tuple(sorted((str(i), str(int(rng.integers(0, i)))))) for i in range(1, n)}
        for _ in range(int(rng.integers(0, n))):
            a, b = rng.integers(0, n, size=2)
            if a != b:
                edges.add(tuple(sorted((str(a), str(b)))))
        graph = Graph(ids, sorted(edges))
        f = {v: float(rng.uniform(-20, 20)) for v in ids}
        result = treeify_pipeline(graph, f)
        tree = result.tree
        assert tree.is_connected()
        assert len(tree.edges) == tree.n - 1
        assert four_point_delta(tree) == 0.0
        for pair in result.tracks.incident_regions.values():
            assert pair[0] != pair[1]


def test_treeify_metric_route(unif64):
    f = {p: float(i) for i, p in enumerate(unif64.ids)}
    result = treeify_metric(unif64, f, R=1.0 / 63.0)
    tree = result.tree
    assert tree.is_connected()
    assert len(tree.edges) == tree.n - 1


def test_treeify_metric_disconnected_net(line3):
    with pytest.raises(DisconnectedGraphError):
        treeify_metric(line3, {p: float(p) for p in line3.ids}, R=0.25)
