"""Partitioning targets among vehicles and collapsing near-coincident targets."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .core import Point, Target, dist

__all__ = [
    "Clustering",
    "MergedTargetSet",
    "KMEANS_MAX_ITER",
    "kmeans",
    "truncate_targets",
    "absorb_target",
]

KMEANS_MAX_ITER = 100


@dataclass(frozen=True)
class Clustering:
    k: int
    assignments: Mapping[int, int]  # target id -> cluster index
    centroids: tuple[Point, ...]
    inertia_history: tuple[float, ...] = field(default=(), compare=False)

    def members(self, index: int) -> list[int]:
        return sorted(tid for tid, c in self.assignments.items() if c == index)


@dataclass(frozen=True)
class MergedTargetSet:
    representatives: tuple[Target, ...]
    merge_map: Mapping[int, int]  # original id -> representative id

    def groups(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {}
        for tid, rep in sorted(self.merge_map.items()):
            out.setdefault(rep, []).append(tid)
        return {rep: tuple(ids) for rep, ids in out.items()}


def _kmeanspp(xy: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(xy)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((xy - xy[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a chosen centre; pick any unused index
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((xy - xy[nxt]) ** 2, axis=1))
    return xy[chosen].copy()


def _assign(xy: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = np.sum((xy[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)  # ties -> lowest cluster index


def _repair_empty(xy: np.ndarray, labels: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    """Give each empty cluster the point lying farthest from its own centre,
    taken from a cluster that can spare it."""
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        counts = np.bincount(labels, minlength=k)
        donors = counts[labels] > 1
        err = np.where(donors, np.sum((xy - centers[labels]) ** 2, axis=1), -1.0)
        labels[int(np.argmax(err))] = c
    return labels


def _inertia(xy: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(np.sum((xy - centers[labels]) ** 2))


def kmeans(
    targets: Sequence[Target],
    k: int,
    seed: int | np.random.SeedSequence = 0,
    max_iter: int = KMEANS_MAX_ITER,
) -> Clustering:
    """Lloyd iterations from k-means++ seeds; no cluster is ever left empty."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not targets:
        raise ValueError("no targets to cluster")
    if k > len(targets):
        raise ValueError(f"k={k} exceeds the number of targets ({len(targets)})")
    ordered = sorted(targets, key=lambda t: t.id)
    xy = np.array([[t.position.x, t.position.y] for t in ordered], dtype=float)
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(xy, k, rng)
    labels = _repair_empty(xy, _assign(xy, centers), centers, k)
    centers = np.array([xy[labels == c].mean(axis=0) for c in range(k)])
    history = [_inertia(xy, labels, centers)]
    for _ in range(max_iter):
        new = _repair_empty(xy, _assign(xy, centers), centers, k)
        if np.array_equal(new, labels):
            break
        labels = new
        centers = np.array([xy[labels == c].mean(axis=0) for c in range(k)])
        history.append(_inertia(xy, labels, centers))
    return Clustering(
        k=k,
        assignments={t.id: int(c) for t, c in zip(ordered, labels)},
        centroids=tuple(Point(float(x), float(y)) for x, y in centers),
        inertia_history=tuple(history),
    )


def truncate_targets(targets: Sequence[Target], merge_radius: float | None = None) -> MergedTargetSet:
    """Single-linkage merge of targets closer than ``merge_radius``.

    With ``merge_radius=None`` two targets link when their loiter circles
    overlap (centre distance below the sum of radii). A merged group is
    represented by its centroid, keeps the lowest member id and the largest
    member loiter radius.
    """
    if merge_radius is not None and merge_radius < 0:
        raise ValueError("merge_radius must be >= 0")
    ordered = sorted(targets, key=lambda t: t.id)
    n = len(ordered)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            a, b = ordered[i], ordered[j]
            cutoff = a.loiter_radius + b.loiter_radius if merge_radius is None else merge_radius
            if dist(a.position, b.position) < cutoff:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[Target]] = {}
    for i, t in enumerate(ordered):
        groups.setdefault(find(i), []).append(t)
    reps, merge_map = [], {}
    for members in groups.values():
        if len(members) == 1:
            rep = members[0]
        else:
            rep = Target(
                id=members[0].id,
                position=Point(
                    float(np.mean([m.position.x for m in members])),
                    float(np.mean([m.position.y for m in members])),
                ),
                loiter_radius=max(m.loiter_radius for m in members),
            )
        reps.append(rep)
        for m in members:
            merge_map[m.id] = rep.id
    reps.sort(key=lambda t: t.id)
    return MergedTargetSet(tuple(reps), merge_map)


def absorb_target(c: Clustering, t: Target) -> Clustering:
    """Attach ``t`` to the cluster with the nearest centroid; centroids stay put."""
    if not c.centroids:
        raise ValueError("cannot absorb into an empty clustering")
    best = min(range(c.k), key=lambda i: (dist(t.position, c.centroids[i]), i))
    assignments = dict(c.assignments)
    assignments[t.id] = best
    return replace(c, assignments=assignments)
