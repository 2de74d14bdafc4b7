"""Weighted graphs, shortest-path machinery and coarse-geometry diagnostics.

Provides the four-point hyperbolicity constant, the ball-deletion bottleneck
check for quasi-trees, expansion and properness profiles of vertex functions,
and empirical quasi-isometry constant fits.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from coarseforest.errors import DisconnectedGraphError

QUAD_BUDGET = 5_000_000
PAIR_BUDGET = 250_000

# lambda grid for QI fits: powers of sqrt(2) from 1 to 1024
LAMBDA_GRID = tuple(2.0 ** (i / 2.0) for i in range(21))


def edge_key(u: str, v: str) -> tuple[str, str]:
    return (u, v) if u <= v else (v, u)


class Graph:
    """Undirected graph with opaque string vertex ids and positive edge lengths.

    No self-loops, at most one edge per unordered pair. The metric is the
    shortest-path metric, infinite across components.
    """

    def __init__(self, vertex_ids: Sequence[str], edges: Iterable[tuple] = ()):
        self.vertex_ids: tuple[str, ...] = tuple(str(v) for v in vertex_ids)
        if len(set(self.vertex_ids)) != len(self.vertex_ids):
            raise ValueError("duplicate vertex ids")
        self._index = {v: i for i, v in enumerate(self.vertex_ids)}
        seen: set[tuple[str, str]] = set()
        normalized: list[tuple[str, str, float]] = []
        for e in edges:
            u, v = str(e[0]), str(e[1])
            length = float(e[2]) if len(e) > 2 else 1.0
            if u == v:
                raise ValueError(f"self-loop at {u!r}")
            if u not in self._index or v not in self._index:
                raise ValueError(f"edge ({u!r}, {v!r}) references unknown vertex")
            if length <= 0:
                raise ValueError(f"edge ({u!r}, {v!r}) has non-positive length {length}")
            key = edge_key(u, v)
            if key in seen:
                raise ValueError(f"duplicate edge ({u!r}, {v!r})")
            seen.add(key)
            normalized.append((key[0], key[1], length))
        self.edges: tuple[tuple[str, str, float], ...] = tuple(normalized)
        self._edge_index = {edge_key(u, v): i for i, (u, v, _) in enumerate(self.edges)}
        self._adj: list[list[tuple[int, float]]] = [[] for _ in self.vertex_ids]
        for u, v, w in self.edges:
            iu, iv = self._index[u], self._index[v]
            self._adj[iu].append((iv, w))
            self._adj[iv].append((iu, w))
        self._dist: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.vertex_ids)

    def index(self, vertex: str) -> int:
        try:
            return self._index[vertex]
        except KeyError:
            raise KeyError(f"unknown vertex {vertex!r}") from None

    def neighbors(self, vertex: str) -> list[str]:
        return [self.vertex_ids[j] for j, _ in self._adj[self.index(vertex)]]

    @property
    def unit_lengths(self) -> bool:
        return all(w == 1.0 for _, _, w in self.edges)

    @property
    def uniform_lengths(self) -> bool:
        lengths = {w for _, _, w in self.edges}
        return len(lengths) <= 1

    def _bfs_row(self, source: int, scale: float = 1.0) -> np.ndarray:
        dist = np.full(self.n, np.inf)
        dist[source] = 0.0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v, _ in self._adj[u]:
                if not np.isfinite(dist[v]):
                    dist[v] = dist[u] + scale
                    queue.append(v)
        return dist

    def _dijkstra_row(self, source: int) -> np.ndarray:
        dist = np.full(self.n, np.inf)
        dist[source] = 0.0
        heap = [(0.0, source)]
        while heap:
            du, u = heapq.heappop(heap)
            if du > dist[u]:
                continue
            for v, w in self._adj[u]:
                alt = du + w
                if alt < dist[v]:
                    dist[v] = alt
                    heapq.heappush(heap, (alt, v))
        return dist

    def distances(self) -> np.ndarray:
        """All-pairs shortest-path matrix (np.inf across components), cached.

        Breadth-first search when all lengths are equal, priority-queue
        relaxation otherwise.
        """
        if self._dist is None:
            out = np.empty((self.n, self.n))
            if self.uniform_lengths:
                scale = self.edges[0][2] if self.edges else 1.0
                for i in range(self.n):
                    out[i] = self._bfs_row(i, scale)
            else:
                for i in range(self.n):
                    out[i] = self._dijkstra_row(i)
            self._dist = out
            self._dist.setflags(write=False)
        return self._dist

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        return bool(np.isfinite(self._bfs_row(0)).all())

    def induced(self, vertices: Sequence[str]) -> "Graph":
        keep = set(vertices)
        ids = [v for v in self.vertex_ids if v in keep]
        edges = [(u, v, w) for u, v, w in self.edges if u in keep and v in keep]
        return Graph(ids, edges)

    def hop_diameter(self) -> int:
        """Max over pairs of the unweighted shortest-path length; requires connected."""
        if self.n <= 1:
            return 0
        best = 0
        for i in range(self.n):
            row = self._bfs_row(i)
            if not np.isfinite(row).all():
                raise DisconnectedGraphError("hop diameter of a disconnected graph")
            best = max(best, int(row.max()))
        return best


def path_graph(n: int, prefix: str = "") -> Graph:
    ids = [f"{prefix}{i}" for i in range(n)]
    return Graph(ids, [(ids[i], ids[i + 1]) for i in range(n - 1)])


def cycle_graph(n: int, prefix: str = "") -> Graph:
    ids = [f"{prefix}{i}" for i in range(n)]
    return Graph(ids, [(ids[i], ids[(i + 1) % n]) for i in range(n)])


def grid_graph(rows: int, cols: int) -> Graph:
    ids = [f"{i},{j}" for i in range(rows) for j in range(cols)]
    edges = []
    for i in range(rows):
        for j in range(cols):
            if i + 1 < rows:
                edges.append((f"{i},{j}", f"{i + 1},{j}"))
            if j + 1 < cols:
                edges.append((f"{i},{j}", f"{i},{j + 1}"))
    return Graph(ids, edges)


def ladder_graph(rungs: int) -> Graph:
    """2 x `rungs` ladder; ids '<rung><rail>' with rails L and R."""
    ids = [f"{i:02d}{side}" for i in range(rungs) for side in ("L", "R")]
    edges = []
    for i in range(rungs):
        edges.append((f"{i:02d}L", f"{i:02d}R"))
        if i + 1 < rungs:
            edges.append((f"{i:02d}L", f"{i + 1:02d}L"))
            edges.append((f"{i:02d}R", f"{i + 1:02d}R"))
    return Graph(ids, edges)


def star_graph(legs: int, leg_length: int = 1) -> Graph:
    ids = ["c"] + [f"{a}{i}" for a in range(legs) for i in range(1, leg_length + 1)]
    edges = []
    for a in range(legs):
        prev = "c"
        for i in range(1, leg_length + 1):
            edges.append((prev, f"{a}{i}"))
            prev = f"{a}{i}"
    return Graph(ids, edges)


def all_pairs_distances(graph: Graph) -> np.ndarray:
    return graph.distances()


@dataclass(frozen=True)
class ExpansionProfile:
    """Sampled expansion bound: rho(t) = max |f(u) - f(v)| over pairs with d <= t."""

    samples: tuple[tuple[float, float], ...]

    def value(self, t: float) -> float:
        for threshold, rho in self.samples:
            if threshold == t:
                return rho
        raise KeyError(f"threshold {t} was not sampled")

    @property
    def max_threshold(self) -> float:
        return self.samples[-1][0] if self.samples else 0.0


@dataclass(frozen=True)
class BandRow:
    center: float
    component_index: int
    vertex_count: int
    hop_diameter: int
    members: tuple[str, ...]


@dataclass(frozen=True)
class PropernessProfile:
    """Component sizes and hop diameters of f-band induced subgraphs."""

    half_width: float
    band_step: float
    rows: tuple[BandRow, ...]
    M: int


@dataclass(frozen=True)
class QIReport:
    """Empirical quasi-isometry constants for a vertex map.

    For every sampled pair, (1/lam) d_src - C <= d_tgt <= lam d_src + C holds
    with the reported constants; lower_bound_vacuous flags fits in which the
    additive constant already absorbs every sampled source distance.
    """

    lam: float
    C: float
    codensity: float
    pair_count: int
    mode: str
    seed: int
    lower_bound_vacuous: bool
    upper_witness: tuple[str, str] | None = None
    lower_witness: tuple[str, str] | None = None

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "C": self.C,
            "codensity": self.codensity,
            "pairCount": self.pair_count,
            "mode": self.mode,
            "seed": self.seed,
            "lowerBoundVacuous": self.lower_bound_vacuous,
            "upperWitness": list(self.upper_witness) if self.upper_witness else None,
            "lowerWitness": list(self.lower_witness) if self.lower_witness else None,
        }


def _require_connected(graph: Graph, what: str) -> None:
    if not graph.is_connected():
        raise DisconnectedGraphError(f"{what} requires a connected graph")


def four_point_delta(graph: Graph, sample_budget: int = QUAD_BUDGET, seed: int = 0) -> float:
    """Four-point hyperbolicity constant over vertex quadruples.

    (largest - second largest) / 2 among the three pairings of d(x,y)+d(z,w);
    exhaustive over quadruples when n^4 <= sample_budget, otherwise sampled
    uniformly with the given seed. Exactly 0 on trees.
    """
    _require_connected(graph, "four_point_delta")
    n = graph.n
    if n < 4:
        return 0.0
    d = graph.distances()

    def delta_of(quads: np.ndarray) -> float:
        a, b, c, e = quads[:, 0], quads[:, 1], quads[:, 2], quads[:, 3]
        sums = np.stack([d[a, b] + d[c, e], d[a, c] + d[b, e], d[a, e] + d[b, c]])
        sums.sort(axis=0)
        return float(((sums[2] - sums[1]) / 2.0).max())

    best = 0.0
    if n**4 <= sample_budget:
        combos = itertools.combinations(range(n), 4)
        while True:
            chunk = np.array(list(itertools.islice(combos, 65536)), dtype=int)
            if chunk.size == 0:
                break
            best = max(best, delta_of(chunk))
    else:
        rng = np.random.default_rng(seed)
        remaining = sample_budget
        while remaining > 0:
            m = min(remaining, 65536)
            quads = rng.integers(0, n, size=(m, 4))
            distinct = (
                (quads[:, 0] != quads[:, 1])
                & (quads[:, 0] != quads[:, 2])
                & (quads[:, 0] != quads[:, 3])
                & (quads[:, 1] != quads[:, 2])
                & (quads[:, 1] != quads[:, 3])
                & (quads[:, 2] != quads[:, 3])
            )
            quads = quads[distinct]
            if quads.size:
                best = max(best, delta_of(quads))
            remaining -= m
    return best


@dataclass(frozen=True)
class BottleneckReport:
    delta: float
    witness_pair: tuple[str, str] | None
    witness_midpoint: str | None
    pair_count: int
    mode: str
    seed: int


def _subdivide_unit(graph: Graph) -> tuple[Graph, list[int]]:
    """Barycentric subdivision of a unit-length graph.

    Distances double; original vertices keep their ids. Returns the subdivided
    graph and the indices of the original vertices inside it.
    """
    ids = list(graph.vertex_ids)
    edges = []
    for u, v, _ in graph.edges:
        mid = f"{u}~{v}"
        ids.append(mid)
        edges.append((u, mid))
        edges.append((mid, v))
    sub = Graph(ids, edges)
    return sub, [sub.index(v) for v in graph.vertex_ids]


def _disconnects(adj: list[list[int]], ball: np.ndarray, x: int, y: int) -> bool:
    """True when removing the ball separates x from y (or swallows one of them)."""
    if ball[x] or ball[y]:
        return True
    seen = ball.copy()
    seen[x] = True
    stack = [x]
    while stack:
        u = stack.pop()
        if u == y:
            return False
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return True


def bottleneck_delta(
    graph: Graph, sample_budget: int = PAIR_BUDGET, seed: int = 0
) -> BottleneckReport:
    """Least Delta (half-integer granularity) for the midpoint bottleneck check.

    For every sampled vertex pair (x, y) there must be a near-midpoint m (an
    exact midpoint exists after one barycentric subdivision) such that either
    d(x, y) <= 2*Delta or deleting the open Delta-ball around m disconnects x
    from y. Requires unit edge lengths.
    """
    _require_connected(graph, "bottleneck_delta")
    if not graph.unit_lengths:
        raise ValueError("bottleneck_delta requires unit edge lengths; subdivide first")
    if graph.n <= 1:
        return BottleneckReport(0.0, None, None, 0, "exhaustive", seed)

    sub, orig_idx = _subdivide_unit(graph)
    d2 = sub.distances().astype(int)  # subdivided distances = 2x original
    adj = [[v for v, _ in sub._adj[i]] for i in range(sub.n)]

    pairs = list(itertools.combinations(range(graph.n), 2))
    mode = "exhaustive"
    if len(pairs) > sample_budget:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(pairs), size=sample_budget, replace=False)
        pairs = [pairs[i] for i in sorted(pick)]
        mode = "sampled"

    overall = 0  # Delta in subdivided units (= half-integers of the original)
    witness_pair = None
    witness_mid = None
    for a, b in pairs:
        x, y = orig_idx[a], orig_idx[b]
        dxy = d2[x, y]
        ceil_half = (dxy + 1) // 2
        balance = np.abs(d2[x] - d2[y]) <= 1
        excess = d2[x] + d2[y] <= dxy + 1
        candidates = np.nonzero(balance & excess)[0]

        def any_disconnects(delta2: int) -> bool:
            if dxy <= 2 * delta2:
                return True
            for m in candidates:
                if _disconnects(adj, d2[m] < delta2, x, y):
                    return True
            return False

        lo, hi = 1, ceil_half
        if not any_disconnects(lo):
            while lo < hi:
                mid = (lo + hi) // 2
                if any_disconnects(mid):
                    hi = mid
                else:
                    lo = mid + 1
        best = lo
        if best > overall:
            overall = best
            witness_pair = (graph.vertex_ids[a], graph.vertex_ids[b])
            chosen = next(
                (m for m in candidates if _disconnects(adj, d2[m] < best, x, y)), None
            )
            witness_mid = sub.vertex_ids[chosen] if chosen is not None else None
    return BottleneckReport(
        delta=overall / 2.0,
        witness_pair=witness_pair,
        witness_midpoint=witness_mid,
        pair_count=len(pairs),
        mode=mode,
        seed=seed,
    )


def expansion_profile(
    graph: Graph, f: Mapping[str, float], thresholds: Sequence[float]
) -> ExpansionProfile:
    """Max |f(u) - f(v)| over vertex pairs with graph distance <= t, per t."""
    values = np.array([float(f[v]) for v in graph.vertex_ids])
    d = graph.distances()
    spread = np.abs(values[:, None] - values[None, :])
    samples = []
    for t in sorted(float(t) for t in thresholds):
        within = d <= t
        samples.append((t, float(spread[within].max()) if within.any() else 0.0))
    return ExpansionProfile(samples=tuple(samples))


def properness_profile(
    graph: Graph, f: Mapping[str, float], half_width: float, band_step: float
) -> PropernessProfile:
    """Components of f-band induced subgraphs over a grid of band centers.

    Bands are closed intervals [x - N, x + N]; an edge belongs to a band iff
    both endpoints do. M is the largest hop diameter over all band components.
    """
    if half_width <= 0 or band_step <= 0:
        raise ValueError("half_width and band_step must be positive")
    values = np.array([float(f[v]) for v in graph.vertex_ids])
    lo, hi = float(values.min()), float(values.max())
    steps = int(math.floor((hi - lo) / band_step + 1e-9))
    centers = [lo + i * band_step for i in range(steps + 1)]
    rows: list[BandRow] = []
    M = 0
    for center in centers:
        member_ids = [
            v for v, val in zip(graph.vertex_ids, values) if center - half_width <= val <= center + half_width
        ]
        if not member_ids:
            continue
        band = graph.induced(member_ids)
        seen: set[str] = set()
        comp_index = 0
        for v in band.vertex_ids:
            if v in seen:
                continue
            row = band._bfs_row(band.index(v))
            members = [band.vertex_ids[i] for i in np.nonzero(np.isfinite(row))[0]]
            seen.update(members)
            comp = band.induced(members)
            diam = comp.hop_diameter()
            rows.append(
                BandRow(
                    center=center,
                    component_index=comp_index,
                    vertex_count=len(members),
                    hop_diameter=diam,
                    members=tuple(members),
                )
            )
            M = max(M, diam)
            comp_index += 1
    return PropernessProfile(
        half_width=float(half_width), band_step=float(band_step), rows=tuple(rows), M=M
    )


def _fit_lambda_c(
    d_src: np.ndarray, d_tgt: np.ndarray
) -> tuple[float, float, int, int]:
    """Minimize lam + C(lam) over the lambda grid; returns fit and witness indices."""
    best = (math.inf, 1.0, 0.0)
    for lam in LAMBDA_GRID:
        upper = d_tgt - lam * d_src
        lower = d_src / lam - d_tgt
        c = max(0.0, float(upper.max()), float(lower.max()))
        if lam + c < best[0] - 1e-12:
            best = (lam + c, lam, c)
    lam, c = best[1], best[2]
    up_idx = int(np.argmax(d_tgt - lam * d_src))
    low_idx = int(np.argmax(d_src / lam - d_tgt))
    return lam, c, up_idx, low_idx


def qi_estimate(
    mapping: Mapping[str, str],
    source: Graph,
    target: Graph,
    sample_budget: int = PAIR_BUDGET,
    seed: int = 0,
    restrict_to: Sequence[str] | None = None,
) -> QIReport:
    """Fit minimal (lambda, C) for a vertex map and measure image codensity.

    Pairs are drawn from ``restrict_to`` (default: all source vertices);
    exhaustive when the pair count fits the budget, seeded-uniform otherwise.
    Codensity is the max over target vertices of the distance to the image.
    """
    _require_connected(source, "qi_estimate")
    _require_connected(target, "qi_estimate")
    vertices = list(restrict_to) if restrict_to is not None else list(source.vertex_ids)
    for v in vertices:
        if v not in mapping:
            raise ValueError(f"map is not total: missing {v!r}")
    src_idx = [source.index(v) for v in vertices]
    tgt_idx = [target.index(mapping[v]) for v in vertices]

    pairs = list(itertools.combinations(range(len(vertices)), 2))
    mode = "exhaustive"
    if len(pairs) > sample_budget:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(pairs), size=sample_budget, replace=False)
        pairs = [pairs[i] for i in sorted(pick)]
        mode = "sampled"

    ds = source.distances()
    dt = target.distances()
    if pairs:
        ai = np.array([src_idx[a] for a, _ in pairs])
        bi = np.array([src_idx[b] for _, b in pairs])
        fa = np.array([tgt_idx[a] for a, _ in pairs])
        fb = np.array([tgt_idx[b] for _, b in pairs])
        d_src = ds[ai, bi]
        d_tgt = dt[fa, fb]
        lam, c, up, low = _fit_lambda_c(d_src, d_tgt)
        vacuous = c >= float(d_src.max()) / lam - 1e-12
        upper_witness = (vertices[pairs[up][0]], vertices[pairs[up][1]])
        lower_witness = (vertices[pairs[low][0]], vertices[pairs[low][1]])
    else:
        lam, c, vacuous = 1.0, 0.0, False
        upper_witness = lower_witness = None

    image = sorted({mapping[v] for v in vertices})
    dist_to_image = dt[[target.index(v) for v in image]].min(axis=0)
    codensity = float(dist_to_image.max()) if image else math.inf
    return QIReport(
        lam=lam,
        C=c,
        codensity=codensity,
        pair_count=len(pairs),
        mode=mode,
        seed=seed,
        lower_bound_vacuous=bool(vacuous),
        upper_witness=upper_witness,
        lower_witness=lower_witness,
    )
