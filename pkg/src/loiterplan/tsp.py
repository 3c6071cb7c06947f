"""Single-cluster tours: Christofides on a metric graph and an exhaustive oracle.

Every tie is broken toward the lowest node id, so results depend only on the
graph, never on iteration order of containers.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Point, dist

__all__ = [
    "MetricGraph",
    "NonMetricError",
    "CycleResult",
    "EXACT_MATCHING_LIMIT",
    "BRUTE_FORCE_LIMIT",
    "christofides",
    "brute_force_tsp",
    "rotate_tour_to_nearest",
    "cycle_length",
]

EXACT_MATCHING_LIMIT = 16
BRUTE_FORCE_LIMIT = 12


class NonMetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Complete graph over ``nodes`` (sorted ids) with a symmetric distance table."""

    nodes: tuple[int, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        nodes = tuple(int(n) for n in self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node ids")
        order = sorted(range(len(nodes)), key=nodes.__getitem__)
        D = np.asarray(self.table, dtype=float)[np.ix_(order, order)]
        object.__setattr__(self, "nodes", tuple(nodes[i] for i in order))
        object.__setattr__(self, "table", D)
        _validate_metric(D)

    @classmethod
    def from_points(cls, points: Mapping[int, Point]) -> "MetricGraph":
        ids = sorted(points)
        xy = np.array([[points[i].x, points[i].y] for i in ids], dtype=float).reshape(-1, 2)
        D = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        return cls(tuple(ids), D)

    def __len__(self) -> int:
        return len(self.nodes)

    def d(self, a: int, b: int) -> float:
        """Distance between node indices (not ids)."""
        return float(self.table[a, b])


def _validate_metric(D: np.ndarray) -> None:
    n = D.shape[0]
    if D.shape != (n, n):
        raise NonMetricError("distance table must be square")
    if n == 0:
        return
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise NonMetricError("distances must be finite and nonnegative")
    if np.any(np.diag(D) != 0):
        raise NonMetricError("nonzero diagonal")
    if not np.array_equal(D, D.T):
        raise NonMetricError("asymmetric distance table")
    slack = 1e-9 * max(1.0, float(D.max()))
    for j in range(n):
        if np.any(D > D[:, j : j + 1] + D[j : j + 1, :] + slack):
            raise NonMetricError(f"triangle inequality violated through node index {j}")


@dataclass(frozen=True)
class CycleResult:
    cycle: tuple[int, ...]  # node ids; closing edge back to cycle[0] implied
    length: float
    exact_matching: bool = True


def cycle_length(g: MetricGraph, idx: Sequence[int]) -> float:
    if len(idx) < 2:
        return 0.0
    total = 0.0
    for a, b in zip(idx, list(idx[1:]) + [idx[0]]):
        total += g.d(a, b)
    return total


def _prim(g: MetricGraph) -> list[tuple[int, int]]:
    n = len(g)
    in_tree = np.zeros(n, dtype=bool)
    key = np.full(n, np.inf)
    parent = np.full(n, -1)
    key[0] = 0.0
    edges = []
    for _ in range(n):
        cand = np.where(in_tree, np.inf, key)
        u = int(np.argmin(cand))  # first minimum: lowest index wins ties
        in_tree[u] = True
        if parent[u] >= 0:
            edges.append((int(parent[u]), u))
        closer = (~in_tree) & (g.table[u] < key)
        key[closer] = g.table[u][closer]
        parent[closer] = u
    return edges


def _exact_matching(g: MetricGraph, odd: list[int]) -> list[tuple[int, int]]:
    """Minimum-weight perfect matching by DP over subsets (pair the lowest free vertex)."""
    k = len(odd)
    W = g.table[np.ix_(odd, odd)]

    @functools.lru_cache(maxsize=None)
    def best(mask: int) -> tuple[float, int]:
        if mask == 0:
            return 0.0, -1
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        choice, value = -1, math.inf
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            cost = W[i, j] + best(rest & ~(1 << j))[0]
            if cost < value:
                value, choice = cost, j
        return value, choice

    pairs = []
    mask = (1 << k) - 1
    while mask:
        i = (mask & -mask).bit_length() - 1
        j = best(mask)[1]
        pairs.append((odd[i], odd[j]))
        mask &= ~((1 << i) | (1 << j))
    best.cache_clear()
    return pairs


def _greedy_matching(g: MetricGraph, odd: list[int]) -> list[tuple[int, int]]:
    pairs_all = sorted(
        (g.d(a, b), a, b) for ai, a in enumerate(odd) for b in odd[ai + 1 :]
    )
    used: set[int] = set()
    pairs = []
    for _, a, b in pairs_all:
        if a not in used and b not in used:
            used.update((a, b))
            pairs.append((a, b))
    return pairs


def _euler_circuit(n: int, edges: list[tuple[int, int]]) -> list[int]:
    """Hierholzer from vertex 0, always leaving along the lowest-index neighbour."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for eid, (a, b) in enumerate(edges):
        adj[a].append((b, eid))
        adj[b].append((a, eid))
    for lst in adj:
        lst.sort()
    used = [False] * len(edges)
    ptr = [0] * n
    stack, circuit = [0], []
    while stack:
        v = stack[-1]
        while ptr[v] < len(adj[v]) and used[adj[v][ptr[v]][1]]:
            ptr[v] += 1
        if ptr[v] == len(adj[v]):
            circuit.append(stack.pop())
        else:
            w, eid = adj[v][ptr[v]]
            used[eid] = True
            stack.append(w)
    circuit.reverse()
    return circuit


def christofides(g: MetricGraph) -> CycleResult:
    """MST + odd-vertex matching + Euler shortcut.

    The 3/2 guarantee only holds when ``exact_matching`` is true, i.e. the
    MST has at most ``EXACT_MATCHING_LIMIT`` odd-degree vertices.
    """
    n = len(g)
    if n == 0:
        raise ValueError("empty graph")
    if n <= 3:
        idx = list(range(n))
        return CycleResult(tuple(g.nodes), cycle_length(g, idx), True)
    mst = _prim(g)
    degree = np.zeros(n, dtype=int)
    for a, b in mst:
        degree[a] += 1
        degree[b] += 1
    odd = [int(v) for v in np.flatnonzero(degree % 2)]
    exact = len(odd) <= EXACT_MATCHING_LIMIT
    matching = _exact_matching(g, odd) if exact else _greedy_matching(g, odd)
    circuit = _euler_circuit(n, mst + matching)
    seen: set[int] = set()
    order = []
    for v in circuit:
        if v not in seen:
            seen.add(v)
            order.append(v)
    return CycleResult(tuple(g.nodes[i] for i in order), cycle_length(g, order), exact)


def brute_force_tsp(g: MetricGraph) -> CycleResult:
    """Exact optimum by enumerating every cycle through the lowest-id node."""
    n = len(g)
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} nodes, got {n}")
    if n == 0:
        raise ValueError("empty graph")
    if n <= 3:
        idx = list(range(n))
        return CycleResult(tuple(g.nodes), cycle_length(g, idx))
    D = g.table
    best_len, best_perm = math.inf, None
    perms = itertools.permutations(range(1, n))
    while True:
        chunk = np.array(list(itertools.islice(perms, 200_000)), dtype=np.intp)
        if chunk.size == 0:
            break
        lengths = D[0, chunk[:, 0]] + D[chunk[:, -1], 0]
        lengths = lengths + D[chunk[:, :-1], chunk[:, 1:]].sum(axis=1)
        i = int(np.argmin(lengths))
        if lengths[i] < best_len:
            best_len, best_perm = float(lengths[i]), chunk[i]
    order = [0, *map(int, best_perm)]
    return CycleResult(tuple(g.nodes[i] for i in order), cycle_length(g, order))


def rotate_tour_to_nearest(
    cycle: Sequence[int], anchor: Point, positions: Mapping[int, Point]
) -> tuple[int, ...]:
    if not cycle:
        raise ValueError("empty cycle")
    start = min(range(len(cycle)), key=lambda i: (dist(anchor, positions[cycle[i]]), cycle[i]))
    return tuple(cycle[start:]) + tuple(cycle[:start])
