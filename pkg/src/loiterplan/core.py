"""Geometric primitives and path-cost evaluation for loiter tours."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

__all__ = [
    "Point",
    "Target",
    "Depot",
    "Tour",
    "Allocation",
    "UnknownTargetError",
    "dist",
    "loiter_arc_length",
    "tour_cost",
    "team_cost",
]


class UnknownTargetError(KeyError):
    """A tour references a target id that is not in the lookup."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Target:
    id: int
    position: Point
    loiter_radius: float

    def __post_init__(self) -> None:
        if not self.loiter_radius > 0:
            raise ValueError(f"target {self.id}: loiter_radius must be > 0")


@dataclass(frozen=True)
class Depot:
    position: Point


@dataclass(frozen=True)
class Tour:
    vehicle_id: int
    sequence: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "sequence", tuple(self.sequence))
        if len(set(self.sequence)) != len(self.sequence):
            raise ValueError(f"vehicle {self.vehicle_id}: repeated target in tour")

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True)
class Allocation:
    """One tour per vehicle.

    ``sites`` resolves every id appearing in a tour. When near-coincident
    targets were merged, a site stands in for several original targets and
    ``members`` lists them; unmerged sites map to themselves.
    """

    tours: tuple[Tour, ...]
    sites: Mapping[int, Target] = field(default_factory=dict)
    members: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tours", tuple(self.tours))
        seen: set[int] = set()
        for tour in self.tours:
            for tid in tour.sequence:
                if tid in seen:
                    raise ValueError(f"target {tid} assigned to more than one tour")
                seen.add(tid)

    def covered(self, site_id: int) -> tuple[int, ...]:
        return self.members.get(site_id, (site_id,))

    def covered_ids(self) -> list[int]:
        """Original target ids visited, in tour order, vehicle by vehicle."""
        out: list[int] = []
        for tour in self.tours:
            for sid in tour.sequence:
                out.extend(self.covered(sid))
        return out


def dist(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def loiter_arc_length(t: Target) -> float:
    return 2.0 * math.pi * t.loiter_radius


def _lookup(targets: Mapping[int, Target], tid: int) -> Target:
    try:
        return targets[tid]
    except KeyError:
        raise UnknownTargetError(tid) from None


def tour_cost(tour: Tour | Sequence[int], depot: Depot, targets: Mapping[int, Target]) -> float:
    """Depot leg to the first target, center-to-center legs, plus one full loiter per target.

    No return leg to the depot is charged.
    """
    seq = tour.sequence if isinstance(tour, Tour) else tuple(tour)
    if not seq:
        return 0.0
    visited = [_lookup(targets, tid) for tid in seq]
    cost = dist(depot.position, visited[0].position)
    for a, b in zip(visited, visited[1:]):
        cost += dist(a.position, b.position)
    for t in visited:
        cost += loiter_arc_length(t)
    return cost


def team_cost(alloc: Allocation, depot: Depot, targets: Mapping[int, Target] | None = None) -> float:
    lookup = alloc.sites if targets is None else targets
    total = 0.0
    for tour in alloc.tours:
        total += tour_cost(tour, depot, lookup)
    return total
