from __future__ import annotations

import numpy as np
import pytest

from conftest import line_space, random_euclidean_space
from coarseforest.errors import MetricValidationError
from coarseforest.metric import (
    d_finitely_connected,
    epsilon_components,
    greedy_maximal_separated,
    is_ultrametric,
    quasi_symmetry_control_estimate,
    subdominant_ultrametric,
    validate_metric,
)
from oracles import components_by_closure, hop_matrix, minimax_all_chains


def test_validate_line3_ok(line3):
    assert line3.ids == ("0", "1", "3")
    assert line3.d("0", "3") == 3.0


def test_validate_triangle_violation():
    with pytest.raises(MetricValidationError) as err:
        validate_metric([[0, 1, 5], [1, 0, 1], [5, 1, 0]], ids=["a", "b", "c"])
    assert err.value.code == "TriangleViolation"
    assert err.value.witness == ("a", "b", "c")


@pytest.mark.parametrize(
    "matrix,code,witness",
    [
        ([[0, 1], [2, 0]], "Asymmetric", ("0", "1")),
        ([[1, 1], [1, 0]], "NonzeroDiagonal", ("0",)),
        ([[0, -1], [-1, 0]], "NegativeEntry", ("0", "1")),
        ([[0, 0], [0, 0]], "DuplicatePoint", ("0", "1")),
    ],
)
def test_validate_axioms(matrix, code, witness):
    with pytest.raises(MetricValidationError) as err:
        validate_metric(matrix)
    assert err.value.code == code
    assert err.value.witness == witness


def test_validate_rejects_ragged():
    with pytest.raises(MetricValidationError) as err:
        validate_metric([[0, 1], [1, 0], [2, 2]])
    assert err.value.code == "MalformedMatrix"


def test_ultrametric_predicate(line3, ult4):
    ok, witness = is_ultrametric(ult4)
    assert ok and witness is None
    ok, witness = is_ultrametric(line3)
    assert not ok
    assert witness == ("0", "3", "1")
    two = validate_metric([[0, 5], [5, 0]])
    assert is_ultrametric(two) == (True, None)


def test_epsilon_components_line3(line3):
    assert epsilon_components(line3, 1.0) == [["0", "1"], ["3"]]
    assert epsilon_components(line3, 2.0) == [["0", "1", "3"]]


def test_epsilon_components_cantor_gap(cantor5):
    blocks = epsilon_components(cantor5, 0.3)
    assert len(blocks) == 2
    # central middle-thirds gap splits at 1/3 vs 2/3
    left, right = blocks
    assert all(cantor5.d(p, "00") < 0.34 for p in left)
    assert all(cantor5.d(p, "63") < 0.34 for p in right)


def test_epsilon_components_match_closure_oracle(cantor5, unif64):
    from coarseforest.metric import step_mask

    for space in (cantor5, unif64, random_euclidean_space(40, seed=7)):
        for eps in (0.05, 0.11, 0.3, 1.0):
            mask = step_mask(space, eps)
            expected = [
                [space.ids[i] for i in block] for block in components_by_closure(mask)
            ]
            assert epsilon_components(space, eps) == expected


def test_epsilon_refinement_property():
    for seed in range(4):
        space = random_euclidean_space(24, seed=seed)
        scales = sorted({round(float(x), 3) for x in np.linspace(0.3, 6.0, 8)})
        previous = None
        for eps in scales:
            blocks = {frozenset(b) for b in epsilon_components(space, eps)}
            if previous is not None:
                # each finer block sits inside one coarser block
                for fine in previous:
                    assert any(fine <= coarse for coarse in blocks)
            previous = blocks


def test_d_finitely_connected_line3(line3):
    report = d_finitely_connected(line3, 2.0, 2)
    assert report.ok
    assert report.worst.chain == ("0", "1", "3")
    assert report.worst.hop_count == 2


def test_d_finitely_connected_unif64(unif64):
    eps = 1.0 / 63.0
    assert not d_finitely_connected(unif64, eps, 62).ok
    report = d_finitely_connected(unif64, eps, 63)
    assert report.ok
    assert report.max_hops == 63


def test_d_finitely_connected_monotone_in_bound(cantor5):
    eps = (1.0 / 3.0) ** 2
    hops = d_finitely_connected(cantor5, eps, cantor5.n).max_hops
    for bound in range(1, hops + 2):
        assert d_finitely_connected(cantor5, eps, bound).ok == (bound >= hops)


def test_d_finitely_connected_matches_minplus_oracle(cantor5, unif64):
    from coarseforest.metric import step_mask

    for space, eps in ((cantor5, 1.0 / 9.0), (cantor5, 0.05), (unif64, 2.5 / 63.0)):
        mask = step_mask(space, eps)
        hops = hop_matrix(mask)
        report = d_finitely_connected(space, eps, space.n)
        for comp in report.components:
            idx = [space.index(p) for p in comp.members]
            expected = int(max(hops[i, j] for i in idx for j in idx))
            assert comp.max_hops == expected


def test_greedy_separated_examples():
    path4 = line_space([0.0, 1.0, 2.0, 3.0])
    assert greedy_maximal_separated(path4, 2.0) == ["0", "2"]
    assert greedy_maximal_separated(path4, 0.5) == ["0", "1", "2", "3"]
    assert greedy_maximal_separated(path4, 10.0) == ["0"]


def test_greedy_separated_predicates():
    for seed in range(5):
        space = random_euclidean_space(30, seed=seed)
        for radius in (0.5, 1.5, 4.0):
            chosen = greedy_maximal_separated(space, radius)
            idx = [space.index(p) for p in chosen]
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    assert space.dist[idx[a], idx[b]] >= radius - 1e-9
            for i in range(space.n):  # maximality: everyone is < radius from the net
                assert min(space.dist[i, j] for j in idx) < radius


def test_subdominant_examples(line3, ult4, unif64):
    sub = subdominant_ultrametric(ult4)
    assert np.array_equal(sub.base.dist, ult4.dist)

    sub3 = subdominant_ultrametric(line3).base
    assert sub3.d("0", "1") == 1.0
    assert sub3.d("1", "3") == 2.0
    assert sub3.d("0", "3") == 2.0

    subu = subdominant_ultrametric(unif64).base
    off = subu.dist[~np.eye(64, dtype=bool)]
    assert np.allclose(off, 1.0 / 63.0)


def test_subdominant_properties_and_oracle(line3, ult4):
    spaces = [line3, ult4] + [random_euclidean_space(n, seed=n) for n in (5, 6, 7, 8)]
    for space in spaces:
        sub = subdominant_ultrametric(space).base
        assert is_ultrametric(sub)[0]
        assert (sub.dist <= space.dist + 1e-12).all()
        expected = minimax_all_chains(space.dist)
        assert np.allclose(sub.dist, expected, atol=0)


def test_control_fit_identity(line3):
    fit = quasi_symmetry_control_estimate(line3, line3)
    assert fit.p == 1.0
    assert fit.q == 1.0
    assert fit.max_violation == 0.0


def _check_fit_bounds(source, target, fit):
    n = source.n
    ds, dt = source.dist, target.dist
    for x in range(n):
        for a in range(n):
            for b in range(n):
                if x == b or ds[x, a] == 0:
                    continue
                t = ds[x, a] / ds[x, b]
                ratio = dt[x, a] / dt[x, b]
                eta = max(t**fit.p, t ** (1.0 / fit.p))
                assert ratio <= fit.q * eta + fit.max_violation + 1e-9


def test_control_fit_line3_vs_subdominant(line3):
    target = subdominant_ultrametric(line3).base
    fit = quasi_symmetry_control_estimate(line3, target)
    assert fit.p >= 1.0 and fit.q >= 1.0
    assert fit.max_violation == 0.0
    _check_fit_bounds(line3, target, fit)


def test_control_fit_cantor_vs_subdominant(cantor5):
    target = subdominant_ultrametric(cantor5).base
    fit = quasi_symmetry_control_estimate(cantor5, target)
    assert fit.mode == "exhaustive"
    assert fit.max_violation == 0.0
    assert np.isfinite(fit.p) and np.isfinite(fit.q)


def test_permuted_space_roundtrip(ult4):
    shuffled = ult4.permuted([2, 0, 3, 1])
    assert shuffled.d("c", "d") == ult4.d("c", "d")
    assert is_ultrametric(shuffled)[0]
