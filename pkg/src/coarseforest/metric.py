"""Validated finite metric spaces and scale-connectivity analyses.

Implements metric-axiom validation, the ultrametric predicate, epsilon-scale
chain connectivity, greedy maximal separated nets, the subdominant (minimax
chain) ultrametric and an empirical power-quasi-symmetry control fit.

Chain convention used throughout the package: a chain step from x to y is
allowed when d(x, y) <= eps (non-strict).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from coarseforest.errors import DegenerateTripleError, MetricValidationError
from coarseforest.scales import Scalar, upper_threshold
from coarseforest.union_find import UnionFind

DEFAULT_TRIANGLE_TOL = 1e-9
DEFAULT_TRIPLE_BUDGET = 2_000_000


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Points with a validated symmetric distance matrix.

    ``dist`` is an (n, n) float array; construct via :func:`validate_metric`
    rather than directly. ``coords`` are retained for provenance only and are
    never used after validation.
    """

    ids: tuple[str, ...]
    dist: np.ndarray
    coords: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        self.dist.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.ids)

    def index(self, point_id: str) -> int:
        try:
            return self.ids.index(point_id)
        except ValueError:
            raise KeyError(f"unknown point id {point_id!r}") from None

    def d(self, a: str, b: str) -> float:
        return float(self.dist[self.index(a), self.index(b)])

    def min_positive_distance(self) -> float:
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min()) if off.size else 0.0

    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def permuted(self, order: Sequence[int]) -> "FiniteMetricSpace":
        """Same space with points listed in a new order."""
        idx = np.asarray(order)
        return FiniteMetricSpace(
            ids=tuple(self.ids[i] for i in order),
            dist=np.ascontiguousarray(self.dist[np.ix_(idx, idx)]),
        )


@dataclass(frozen=True)
class UltrametricSpace:
    """A metric space additionally satisfying d(x,y) <= max(d(x,z), d(z,y))."""

    base: FiniteMetricSpace


@dataclass(frozen=True)
class ChainCertificate:
    """An explicit eps-chain between two points; hop_count = len(chain) - 1."""

    scale: float
    endpoints: tuple[str, str]
    chain: tuple[str, ...]
    hop_count: int


@dataclass(frozen=True)
class ComponentHops:
    members: tuple[str, ...]
    max_hops: int
    witness_pair: tuple[str, str]


@dataclass(frozen=True)
class ConnectivityReport:
    """Per-component chain-hop eccentricities at one scale."""

    scale: float
    bound: int
    ok: bool
    components: tuple[ComponentHops, ...]
    worst: ChainCertificate | None

    @property
    def max_hops(self) -> int:
        return max((c.max_hops for c in self.components), default=0)


@dataclass(frozen=True)
class ControlFit:
    """Empirical control-function fit eta(t) = q * max(t^p, t^(1/p)).

    q is taken as the largest implied ratio on the scanned triples, so
    max_violation is zero by construction unless q was clamped from below.
    """

    p: float
    q: float
    max_violation: float
    triple_count: int
    mode: str
    samples: tuple[tuple[float, float], ...] = field(default=())


def _ids_for(n: int, ids: Sequence[str] | None) -> tuple[str, ...]:
    if ids is None:
        return tuple(str(i) for i in range(n))
    if len(set(ids)) != len(ids):
        raise MetricValidationError("MalformedMatrix", (), "duplicate point ids")
    return tuple(str(i) for i in ids)


def validate_metric(
    raw_matrix,
    ids: Sequence[str] | None = None,
    coords: Sequence[Sequence[float]] | None = None,
    tol: float = DEFAULT_TRIANGLE_TOL,
) -> FiniteMetricSpace:
    """Validate a square distance matrix and return the metric space.

    Raises :class:`MetricValidationError` naming the first violated axiom in
    scan order (shape/finiteness, negative entries, nonzero diagonal,
    asymmetry, duplicate points, triangle inequality) with witness indices.
    Triangle checks allow an additive slack ``tol`` for float inputs.
    """
    arr = np.asarray(raw_matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise MetricValidationError(
            "MalformedMatrix", (), f"expected a nonempty square matrix, got shape {arr.shape}"
        )
    n = arr.shape[0]
    labels = _ids_for(n, ids)
    if not np.isfinite(arr).all():
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise MetricValidationError(
            "MalformedMatrix", (labels[i], labels[j]), f"non-finite entry at ({labels[i]}, {labels[j]})"
        )
    if (arr < 0).any():
        i, j = np.argwhere(arr < 0)[0]
        raise MetricValidationError(
            "NegativeEntry", (labels[i], labels[j]),
            f"d({labels[i]}, {labels[j]}) = {arr[i, j]} is negative",
        )
    diag = np.diagonal(arr)
    if (diag != 0).any():
        i = int(np.argwhere(diag != 0)[0][0])
        raise MetricValidationError(
            "NonzeroDiagonal", (labels[i],), f"d({labels[i]}, {labels[i]}) = {diag[i]} != 0"
        )
    asym = arr != arr.T
    if asym.any():
        i, j = np.argwhere(asym)[0]
        raise MetricValidationError(
            "Asymmetric", (labels[i], labels[j]),
            f"d({labels[i]}, {labels[j]}) = {arr[i, j]} != d({labels[j]}, {labels[i]}) = {arr[j, i]}",
        )
    zero_off = (arr == 0) & ~np.eye(n, dtype=bool)
    if zero_off.any():
        i, j = np.argwhere(zero_off)[0]
        raise MetricValidationError(
            "DuplicatePoint", (labels[i], labels[j]),
            f"points {labels[i]} and {labels[j]} are at distance 0",
        )
    # Triangle scan: first (i, j, k) in lexicographic order with
    # d(i, k) > d(i, j) + d(j, k) + tol.
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            excess = arr[i] - (arr[i, j] + arr[j])
            bad = np.argwhere(excess > tol)
            if bad.size:
                k = int(bad[0][0])
                raise MetricValidationError(
                    "TriangleViolation", (labels[i], labels[j], labels[k]),
                    f"d({labels[i]}, {labels[k]}) = {arr[i, k]} exceeds "
                    f"d({labels[i]}, {labels[j]}) + d({labels[j]}, {labels[k]}) = {arr[i, j] + arr[j, k]}",
                )
    return FiniteMetricSpace(
        ids=labels,
        dist=np.ascontiguousarray(arr),
        coords=tuple(tuple(map(float, c)) for c in coords) if coords is not None else None,
    )


def is_ultrametric(space: FiniteMetricSpace, tol: float = 0.0) -> tuple[bool, tuple[str, str, str] | None]:
    """Check the strong triangle inequality for every triple.

    Returns (True, None) or (False, (x, y, z)) where
    d(x, y) > max(d(x, z), d(z, y)) + tol.
    """
    d = space.dist
    n = space.n
    for z in range(n):
        bound = np.maximum.outer(d[:, z], d[z, :])
        bad = np.argwhere(d > bound + tol)
        if bad.size:
            x, y = (int(v) for v in bad[0])
            return False, (space.ids[x], space.ids[y], space.ids[z])
    return True, None


def step_mask(space: FiniteMetricSpace, eps: Scalar) -> np.ndarray:
    """Boolean matrix of allowed chain steps (d <= eps, diagonal False)."""
    mask = space.dist <= upper_threshold(eps)
    np.fill_diagonal(mask, False)
    return mask


def _hop_distances(mask: np.ndarray, source: int) -> np.ndarray:
    """BFS hop distances on a boolean adjacency matrix; -1 when unreachable."""
    n = mask.shape[0]
    dist = np.full(n, -1, dtype=int)
    dist[source] = 0
    frontier = np.zeros(n, dtype=bool)
    frontier[source] = True
    hops = 0
    while frontier.any():
        hops += 1
        reach = mask[frontier].any(axis=0) & (dist < 0)
        dist[reach] = hops
        frontier = reach
    return dist


def epsilon_components(space: FiniteMetricSpace, eps: Scalar) -> list[list[str]]:
    """Partition of the points into eps-chain components.

    Blocks are ordered by their smallest point index; members keep input order.
    """
    mask = step_mask(space, eps)
    uf = UnionFind(range(space.n))
    for i, j in zip(*np.nonzero(np.triu(mask, k=1))):
        uf.union(int(i), int(j))
    blocks: dict[int, list[int]] = {}
    for i in range(space.n):
        blocks.setdefault(uf.find(i), []).append(i)
    ordered = sorted(blocks.values(), key=lambda b: b[0])
    return [[space.ids[i] for i in block] for block in ordered]


def _chain_between(space: FiniteMetricSpace, mask: np.ndarray, src: int, dst: int) -> list[int]:
    """One shortest chain realized by BFS parents."""
    n = space.n
    parent = np.full(n, -1, dtype=int)
    seen = np.zeros(n, dtype=bool)
    seen[src] = True
    frontier = [src]
    while frontier and not seen[dst]:
        nxt = []
        for u in frontier:
            for v in np.nonzero(mask[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    parent[v] = u
                    nxt.append(int(v))
        frontier = nxt
    chain = [dst]
    while chain[-1] != src:
        chain.append(int(parent[chain[-1]]))
    chain.reverse()
    return chain


def d_finitely_connected(space: FiniteMetricSpace, eps: Scalar, bound: int) -> ConnectivityReport:
    """Hop eccentricities of eps-chain components against a hop bound.

    For each component, the maximum over point pairs of the minimum chain hop
    count; ``ok`` is True when every maximum is <= bound. The worst pair's
    chain is returned as a certificate.
    """
    if bound < 1:
        raise ValueError("hop bound must be >= 1")
    mask = step_mask(space, eps)
    components = epsilon_components(space, eps)
    rows: list[ComponentHops] = []
    worst: tuple[int, int, int] | None = None
    for block in components:
        idx = [space.index(p) for p in block]
        best = (0, idx[0], idx[0])
        for i in idx:
            hops = _hop_distances(mask, i)
            j = max(idx, key=lambda k: hops[k])
            if hops[j] > best[0]:
                best = (int(hops[j]), i, int(j))
        rows.append(
            ComponentHops(
                members=tuple(block),
                max_hops=best[0],
                witness_pair=(space.ids[best[1]], space.ids[best[2]]),
            )
        )
        if worst is None or best[0] > worst[0]:
            worst = best
    certificate = None
    if worst is not None and worst[0] > 0:
        chain = _chain_between(space, mask, worst[1], worst[2])
        certificate = ChainCertificate(
            scale=float(eps),
            endpoints=(space.ids[worst[1]], space.ids[worst[2]]),
            chain=tuple(space.ids[i] for i in chain),
            hop_count=len(chain) - 1,
        )
    ok = all(r.max_hops <= bound for r in rows)
    return ConnectivityReport(
        scale=float(eps), bound=bound, ok=ok, components=tuple(rows), worst=certificate
    )


def greedy_maximal_separated(space: FiniteMetricSpace, radius: Scalar) -> list[str]:
    """Greedy maximal radius-separated subset, scanning points in listed order.

    The result A satisfies d(a, a') >= radius for distinct a, a' in A and every
    point lies within < radius of some member.
    """
    from coarseforest.scales import lower_threshold

    thresh = lower_threshold(radius)
    chosen: list[int] = []
    for i in range(space.n):
        if all(space.dist[i, j] >= thresh for j in chosen):
            chosen.append(i)
    return [space.ids[i] for i in chosen]


def subdominant_ultrametric(space: FiniteMetricSpace) -> UltrametricSpace:
    """Largest ultrametric below the metric: minimax chain cost per pair.

    Computed by a minimax Floyd-Warshall sweep; the output is pointwise <= the
    input and equals the input exactly when the input is already ultrametric.
    """
    d = space.dist.copy()
    for k in range(space.n):
        np.minimum(d, np.maximum.outer(d[:, k], d[k, :]), out=d)
    return UltrametricSpace(base=FiniteMetricSpace(ids=space.ids, dist=d))


def _aligned_matrix(
    source: FiniteMetricSpace, target: FiniteMetricSpace, correspondence: Mapping[str, str] | None
) -> np.ndarray:
    """Target distances re-indexed so row/col i is the image of source point i."""
    if source.n != target.n:
        raise ValueError("correspondence requires spaces of equal size")
    if correspondence is None:
        order = list(range(source.n))
    else:
        order = [target.index(correspondence[p]) for p in source.ids]
        if len(set(order)) != len(order):
            raise ValueError("correspondence is not a bijection")
    idx = np.asarray(order)
    return target.dist[np.ix_(idx, idx)]


def quasi_symmetry_control_estimate(
    source: FiniteMetricSpace,
    target: FiniteMetricSpace,
    correspondence: Mapping[str, str] | None = None,
    p_max: float = 8.0,
    p_steps: int = 64,
    triple_budget: int = DEFAULT_TRIPLE_BUDGET,
    seed: int = 0,
) -> ControlFit:
    """Fit the smallest control q over a geometric grid of exponents p.

    Scans ordered triples (x, a, b) with x != b, forms t = |xa|/|xb| in the
    source and the corresponding image ratio in the target, and for each p on
    the grid takes q(p) as the largest ratio / max(t^p, t^(1/p)). The reported
    (p, q) minimizes q (ties to the smaller p); q is clamped to >= 1. This is
    an empirical estimator, not a decision procedure.
    """
    du = _aligned_matrix(source, target, correspondence)
    dz = source.dist
    n = source.n
    if n >= 2:
        off = ~np.eye(n, dtype=bool)
        if (dz[off] == 0).any() or (du[off] == 0).any():
            raise DegenerateTripleError("zero distance between distinct points")

    exhaustive = n**3 <= triple_budget
    if exhaustive:
        # t[x, a, b] = dz[x, a] / dz[x, b] for all ordered triples with x != b.
        with np.errstate(divide="ignore", invalid="ignore"):
            t = dz[:, :, None] / dz[:, None, :]
            ratio = du[:, :, None] / du[:, None, :]
        keep = np.ones((n, n, n), dtype=bool)
        xs = np.arange(n)
        keep[xs, :, xs] = False  # x == b
        t = t[keep]
        ratio = ratio[keep]
        mode = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        xs = rng.integers(0, n, size=triple_budget)
        as_ = rng.integers(0, n, size=triple_budget)
        bs = rng.integers(0, n, size=triple_budget)
        ok = xs != bs
        xs, as_, bs = xs[ok], as_[ok], bs[ok]
        t = dz[xs, as_] / dz[xs, bs]
        ratio = du[xs, as_] / du[xs, bs]
        mode = "sampled"

    positive = t > 0  # t == 0 forces ratio == 0; such triples never bind
    t_pos, ratio_pos = t[positive], ratio[positive]
    grid = np.geomspace(1.0, p_max, p_steps)
    grid[0] = 1.0
    best_p, best_q = 1.0, np.inf
    for p in grid:
        eta = np.maximum(t_pos**p, t_pos ** (1.0 / p))
        q = float((ratio_pos / eta).max()) if t_pos.size else 1.0
        if q < best_q - 1e-15:
            best_p, best_q = float(p), q
    q_fit = max(1.0, best_q)
    eta_fit = np.maximum(t_pos**best_p, t_pos ** (1.0 / best_p))
    violation = float(np.maximum(ratio_pos - q_fit * eta_fit, 0.0).max()) if t_pos.size else 0.0
    # Keep the most binding (t, ratio) pairs as the recorded sample.
    if t_pos.size:
        order = np.argsort(ratio_pos / eta_fit)[::-1][:16]
        samples = tuple((float(t_pos[i]), float(ratio_pos[i])) for i in order)
    else:
        samples = ()
    return ControlFit(
        p=best_p,
        q=q_fit,
        max_violation=violation,
        triple_count=int(t.size),
        mode=mode,
        samples=samples,
    )
