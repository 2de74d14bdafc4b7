from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from coarseforest.files import space_from_points
from coarseforest.metric import FiniteMetricSpace, validate_metric


def line_space(positions, ids=None) -> FiniteMetricSpace:
    pos = np.asarray(positions, dtype=float)
    dist = np.abs(pos[:, None] - pos[None, :])
    return validate_metric(dist, ids=ids)


def cantor_endpoints(depth: int) -> list[Fraction]:
    intervals = [(Fraction(0), Fraction(1))]
    for _ in range(depth):
        nxt = []
        for a, b in intervals:
            third = (b - a) / 3
            nxt.append((a, a + third))
            nxt.append((b - third, b))
        intervals = nxt
    points = sorted({end for pair in intervals for end in pair})
    return points


def random_euclidean_space(n: int, seed: int) -> FiniteMetricSpace:
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 10.0, size=(n, 2))
    return space_from_points(pts.tolist(), metric="euclidean")


@pytest.fixture(scope="session")
def line3() -> FiniteMetricSpace:
    return line_space([0.0, 1.0, 3.0], ids=["0", "1", "3"])


@pytest.fixture(scope="session")
def ult4() -> FiniteMetricSpace:
    near, far = 1.0 / 36.0, 1.0 / 6.0
    matrix = [
        [0.0, near, far, far],
        [near, 0.0, far, far],
        [far, far, 0.0, near],
        [far, far, near, 0.0],
    ]
    return validate_metric(matrix, ids=["a", "b", "c", "d"])


@pytest.fixture(scope="session")
def cantor5() -> FiniteMetricSpace:
    points = cantor_endpoints(5)
    assert len(points) == 64
    ids = [f"{i:02d}" for i in range(len(points))]
    return line_space([float(p) for p in points], ids=ids)


@pytest.fixture(scope="session")
def unif64() -> FiniteMetricSpace:
    return line_space([i / 63.0 for i in range(64)], ids=[f"{i:02d}" for i in range(64)])
