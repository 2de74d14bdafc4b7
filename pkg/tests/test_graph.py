from __future__ import annotations

import numpy as np
import pytest

from coarseforest.errors import DisconnectedGraphError
from coarseforest.graph import (
    Graph,
    all_pairs_distances,
    bottleneck_delta,
    cycle_graph,
    expansion_profile,
    four_point_delta,
    grid_graph,
    ladder_graph,
    path_graph,
    properness_profile,
    qi_estimate,
    star_graph,
)
from oracles import expansion_scan, four_point_scan, properness_scan


def random_tree(n: int, seed: int) -> Graph:
    rng = np.random.default_rng(seed)
    ids = [str(i) for i in range(n)]
    edges = [(str(i), str(int(rng.integers(0, i)))) for i in range(1, n)]
    return Graph(ids, edges)


def identity_f(graph: Graph) -> dict[str, float]:
    return {v: float(v) for v in graph.vertex_ids}


def adjacency_matrix(graph: Graph) -> np.ndarray:
    out = np.zeros((graph.n, graph.n), dtype=bool)
    for u, v, _ in graph.edges:
        i, j = graph.index(u), graph.index(v)
        out[i, j] = out[j, i] = True
    return out


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        Graph(["a"], [("a", "a")])
    with pytest.raises(ValueError):
        Graph(["a", "b"], [("a", "b"), ("b", "a")])
    with pytest.raises(ValueError):
        Graph(["a", "b"], [("a", "b", 0.0)])


def test_all_pairs_examples():
    p9 = path_graph(9)
    assert all_pairs_distances(p9)[p9.index("0"), p9.index("8")] == 8.0
    c8 = cycle_graph(8)
    assert all_pairs_distances(c8)[c8.index("0"), c8.index("4")] == 4.0
    two = Graph(["a", "b", "c"], [("a", "b")])
    assert np.isinf(all_pairs_distances(two)[two.index("a"), two.index("c")])


def test_weighted_distances_use_relaxation():
    g = Graph(["a", "b", "c"], [("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 5.0)])
    d = all_pairs_distances(g)
    assert d[g.index("a"), g.index("c")] == 2.0


def test_four_point_zero_on_trees():
    for n, seed in ((9, 0), (25, 1), (40, 2)):
        tree = random_tree(n, seed)
        assert four_point_delta(tree, sample_budget=n**4) == 0.0
    assert four_point_delta(Graph(["x"], [])) == 0.0
    assert four_point_delta(Graph(["x", "y"], [("x", "y")])) == 0.0


def test_four_point_c8_matches_oracle():
    c8 = cycle_graph(8)
    value = four_point_delta(c8, sample_budget=8**4)
    assert value == four_point_scan(all_pairs_distances(c8))
    assert value == 2.0


def test_four_point_disconnected():
    with pytest.raises(DisconnectedGraphError):
        four_point_delta(Graph(["a", "b"], []))


def test_four_point_sampled_mode_bounded_by_exhaustive():
    c8 = cycle_graph(8)
    exact = four_point_delta(c8, sample_budget=8**4)
    sampled = four_point_delta(c8, sample_budget=512, seed=1)
    assert 0.0 <= sampled <= exact
    assert four_point_delta(c8, sample_budget=512, seed=1) == sampled


def test_bottleneck_path_and_star():
    assert bottleneck_delta(path_graph(9)).delta == 0.5
    assert bottleneck_delta(star_graph(3)).delta <= 1.0


def test_bottleneck_trees_small_delta():
    for n, seed in ((16, 3), (48, 4)):
        tree = random_tree(n, seed)
        assert bottleneck_delta(tree).delta <= 1.0


def test_bottleneck_cycles_grow_linearly():
    values = {n: bottleneck_delta(cycle_graph(n)).delta for n in (8, 16, 32)}
    assert values == {8: 2.0, 16: 4.0, 32: 8.0}


def test_expansion_examples():
    p9 = path_graph(9)
    profile = expansion_profile(p9, identity_f(p9), [1, 2, 3])
    assert profile.samples == ((1.0, 1.0), (2.0, 2.0), (3.0, 3.0))
    constant = expansion_profile(p9, {v: 2.5 for v in p9.vertex_ids}, [1, 2])
    assert all(rho == 0.0 for _, rho in constant.samples)
    g5 = grid_graph(5, 5)
    cols = {v: float(v.split(",")[1]) for v in g5.vertex_ids}
    assert expansion_profile(g5, cols, [3]).value(3) == 3.0


def test_expansion_monotone_and_oracle():
    g = grid_graph(4, 6)
    rng = np.random.default_rng(11)
    f = {v: float(rng.uniform(-3, 3)) for v in g.vertex_ids}
    thresholds = [1, 2, 3, 5, 8]
    profile = expansion_profile(g, f, thresholds)
    rhos = [rho for _, rho in profile.samples]
    assert rhos == sorted(rhos)
    d = all_pairs_distances(g)
    values = np.array([f[v] for v in g.vertex_ids])
    for t, rho in profile.samples:
        assert rho == expansion_scan(d, values, t)


def test_properness_path9():
    p9 = path_graph(9)
    profile = properness_profile(p9, identity_f(p9), half_width=1.0, band_step=1.0)
    assert profile.M == 2
    assert all(row.hop_diameter <= 2 for row in profile.rows)


def test_properness_grid_full_band():
    # a closed 3-column band spans full columns plus two cross hops
    for k in (5, 7):
        g = grid_graph(k, k)
        cols = {v: float(v.split(",")[1]) for v in g.vertex_ids}
        profile = properness_profile(g, cols, half_width=1.0, band_step=1.0)
        assert profile.M == k + 1


def test_properness_grid_single_column_band():
    for k in (5, 9):
        g = grid_graph(k, k)
        cols = {v: float(v.split(",")[1]) for v in g.vertex_ids}
        profile = properness_profile(g, cols, half_width=0.5, band_step=1.0)
        assert profile.M == k - 1


def test_properness_ladder_bounded():
    for k in (8, 16, 32):
        g = ladder_graph(k)
        rung = {v: float(int(v[:2])) for v in g.vertex_ids}
        profile = properness_profile(g, rung, half_width=1.0, band_step=1.0)
        assert profile.M == 3


def test_properness_matches_enumeration_oracle():
    cases = [(grid_graph(4, 5), 23), (grid_graph(8, 8), 31), (ladder_graph(32), 37)]
    for g, seed in cases:
        rng = np.random.default_rng(seed)
        f = {v: float(rng.integers(0, 5)) for v in g.vertex_ids}
        values = np.array([f[v] for v in g.vertex_ids])
        adjacency = adjacency_matrix(g)
        for n_half, step in ((1.0, 1.0), (0.5, 0.5), (2.0, 1.0)):
            profile = properness_profile(g, f, half_width=n_half, band_step=step)
            assert profile.M == properness_scan(adjacency, values, n_half, step)


def test_qi_identity_exact():
    p9 = path_graph(9)
    report = qi_estimate({v: v for v in p9.vertex_ids}, p9, p9)
    assert (report.lam, report.C, report.codensity) == (1.0, 0.0, 0.0)
    assert not report.lower_bound_vacuous


def test_qi_floor_map():
    p9, p5 = path_graph(9), path_graph(5)
    report = qi_estimate({str(i): str(i // 2) for i in range(9)}, p9, p5)
    assert report.lam == 2.0
    assert report.C <= 1.0
    assert report.codensity == 0.0
    # reported constants are valid bounds on every pair
    d9, d5 = all_pairs_distances(p9), all_pairs_distances(p5)
    for i in range(9):
        for j in range(i + 1, 9):
            ds = d9[i, j]
            dt = d5[i // 2, j // 2]
            assert ds / report.lam - report.C <= dt <= report.lam * ds + report.C


def test_qi_constant_map_flagged():
    p9 = path_graph(9)
    report = qi_estimate({v: "0" for v in p9.vertex_ids}, p9, p9)
    assert report.lower_bound_vacuous
    assert report.codensity == 8.0
