"""Target-to-vehicle assignment.

Static planning clusters the targets once per fleet, builds a Christofides
tour inside every cluster and starts it at the target closest to the depot.
Dynamic planning keeps the clusters frozen, absorbs newly reported targets
into the nearest one and replans each cluster from wherever its vehicle
finished the previous round.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .clustering import KMEANS_MAX_ITER, Clustering, absorb_target, kmeans, truncate_targets
from .core import Allocation, Depot, Point, Target, Tour, dist, team_cost, tour_cost
from .tsp import MetricGraph, christofides, rotate_tour_to_nearest

__all__ = [
    "VehicleStatus",
    "FleetState",
    "ArrivalEvent",
    "DynamicPlan",
    "assign_static",
    "plan_cluster",
    "start_dynamic",
    "assign_dynamic_iteration",
    "continuation_cost",
    "procedure1_total_cost",
    "procedure2_total_cost",
]


class VehicleStatus(str, enum.Enum):
    AT_DEPOT = "at-depot"
    TOURING = "touring"
    IDLE = "idle-at-last-target"


@dataclass(frozen=True)
class FleetState:
    positions: tuple[Point, ...]
    status: tuple[VehicleStatus, ...]
    iteration: int = 0

    @classmethod
    def at_depot(cls, m: int, depot: Depot) -> "FleetState":
        return cls((depot.position,) * m, (VehicleStatus.AT_DEPOT,) * m)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class ArrivalEvent:
    time: float
    added: tuple[Target, ...] = ()
    removed: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError("event time must be >= 0")
        object.__setattr__(self, "added", tuple(self.added))
        object.__setattr__(self, "removed", tuple(self.removed))


@dataclass(frozen=True)
class DynamicPlan:
    """Everything carried from one dynamic iteration to the next."""

    fleet: FleetState
    clustering: Clustering
    targets: Mapping[int, Target]  # known and not removed
    visited: frozenset[int] = frozenset()
    removed: frozenset[int] = frozenset()
    history: tuple[Allocation, ...] = field(default=(), compare=False)

    def unvisited(self, cluster: int) -> list[Target]:
        return [
            self.targets[tid]
            for tid in self.clustering.members(cluster)
            if tid not in self.visited and tid in self.targets
        ]


def plan_cluster(
    members: Sequence[Target], anchor: Point, merge_radius: float | None = None
) -> tuple[tuple[int, ...], dict[int, Target], dict[int, tuple[int, ...]]]:
    """Merge, tour and rotate one cluster; returns (sequence, sites, merged groups)."""
    if not members:
        return (), {}, {}
    merged = truncate_targets(members, merge_radius)
    sites = {t.id: t for t in merged.representatives}
    graph = MetricGraph.from_points({tid: t.position for tid, t in sites.items()})
    cycle = christofides(graph).cycle
    seq = rotate_tour_to_nearest(cycle, anchor, {tid: t.position for tid, t in sites.items()})
    groups = {rep: ids for rep, ids in merged.groups().items() if len(ids) > 1}
    return seq, sites, groups


def _assemble(tours: list[tuple[tuple[int, ...], dict, dict]]) -> Allocation:
    sites: dict[int, Target] = {}
    members: dict[int, tuple[int, ...]] = {}
    out = []
    for vid, (seq, s, g) in enumerate(tours):
        sites.update(s)
        members.update(g)
        out.append(Tour(vid, seq))
    return Allocation(tuple(out), sites, members)


def assign_static(
    targets: Sequence[Target],
    m: int,
    depot: Depot,
    seed: int = 0,
    *,
    merge_radius: float | None = None,
    kmeans_max_iter: int = KMEANS_MAX_ITER,
) -> Allocation:
    """Cluster into ``m`` groups and tour each group starting nearest the depot."""
    if m < 1:
        raise ValueError("fleet size must be >= 1")
    if not targets:
        raise ValueError("no targets")
    if m > len(targets):
        raise ValueError(f"fleet of {m} exceeds {len(targets)} targets; clusters would be empty")
    clustering = kmeans(targets, m, seed, kmeans_max_iter)
    by_id = {t.id: t for t in targets}
    tours = [
        plan_cluster([by_id[i] for i in clustering.members(c)], depot.position, merge_radius)
        for c in range(m)
    ]
    return _assemble(tours)


def start_dynamic(
    targets: Sequence[Target],
    m: int,
    depot: Depot,
    seed: int = 0,
    *,
    kmeans_max_iter: int = KMEANS_MAX_ITER,
) -> DynamicPlan:
    """Cluster once, up front; later iterations only absorb and replan.

    With fewer targets than vehicles only ``len(targets)`` clusters exist and
    the remaining vehicles stay at the depot until a cluster is theirs.
    """
    if m < 1:
        raise ValueError("fleet size must be >= 1")
    if not targets:
        raise ValueError("no targets")
    k = min(m, len(targets))
    clustering = kmeans(targets, k, seed, kmeans_max_iter)
    return DynamicPlan(
        fleet=FleetState.at_depot(m, depot),
        clustering=clustering,
        targets={t.id: t for t in targets},
    )


def _apply_events(plan: DynamicPlan, events: Iterable[ArrivalEvent]) -> DynamicPlan:
    targets = dict(plan.targets)
    clustering = plan.clustering
    removed = set(plan.removed)
    for ev in events:
        for tid in ev.removed:
            if tid in targets and tid not in plan.visited:
                del targets[tid]
                assignments = dict(clustering.assignments)
                assignments.pop(tid, None)
                clustering = Clustering(clustering.k, assignments, clustering.centroids, clustering.inertia_history)
                removed.add(tid)
        for t in ev.added:
            if t.id in targets or t.id in plan.visited or t.id in removed:
                raise ValueError(f"target id {t.id} already used")
            targets[t.id] = t
            clustering = absorb_target(clustering, t)
    return DynamicPlan(plan.fleet, clustering, targets, plan.visited, frozenset(removed), plan.history)


def assign_dynamic_iteration(
    plan: DynamicPlan,
    events: Iterable[ArrivalEvent] = (),
    *,
    merge_radius: float | None = None,
) -> tuple[Allocation, DynamicPlan]:
    """One round: absorb pending events, replan every cluster, fly the tours.

    Each tour starts at the unvisited target nearest its vehicle's current
    position, which on the first round is the depot. Vehicles stay on their
    last target afterwards instead of returning.
    """
    plan = _apply_events(plan, events)
    fleet = plan.fleet
    m = len(fleet)
    tours = []
    for vid in range(m):
        members = plan.unvisited(vid) if vid < plan.clustering.k else []
        tours.append(plan_cluster(members, fleet.positions[vid], merge_radius))
    alloc = _assemble(tours)

    positions = list(fleet.positions)
    status = list(fleet.status)
    visited = set(plan.visited)
    for tour in alloc.tours:
        if tour.sequence:
            positions[tour.vehicle_id] = alloc.sites[tour.sequence[-1]].position
            status[tour.vehicle_id] = VehicleStatus.IDLE
            for sid in tour.sequence:
                visited.update(alloc.covered(sid))
    new_fleet = FleetState(tuple(positions), tuple(status), fleet.iteration + 1)
    nxt = DynamicPlan(
        new_fleet, plan.clustering, plan.targets, frozenset(visited), plan.removed, plan.history + (alloc,)
    )
    return alloc, nxt


def continuation_cost(alloc: Allocation, starts: Sequence[Point]) -> float:
    """Team cost when each vehicle departs from its own start point."""
    total = 0.0
    for tour in alloc.tours:
        total += tour_cost(tour, Depot(starts[tour.vehicle_id]), alloc.sites)
    return total


def procedure1_total_cost(
    initial: Sequence[Target],
    arrivals: Sequence[Target],
    m: int,
    depot: Depot,
    seed: int = 0,
    *,
    merge_radius: float | None = None,
) -> float:
    """Static replanning: tour, fly home, then tour the new targets from the depot."""
    run1 = assign_static(initial, m, depot, seed, merge_radius=merge_radius)
    cost = team_cost(run1, depot)
    for tour in run1.tours:
        if tour.sequence:
            cost += dist(run1.sites[tour.sequence[-1]].position, depot.position)
    if arrivals:
        run2 = assign_static(arrivals, min(m, len(arrivals)), depot, seed, merge_radius=merge_radius)
        cost += team_cost(run2, depot)
    return cost


def procedure2_total_cost(
    initial: Sequence[Target],
    arrivals: Sequence[Target],
    m: int,
    depot: Depot,
    seed: int = 0,
    *,
    merge_radius: float | None = None,
) -> float:
    """Dynamic replanning: absorb the new targets and continue from the last target."""
    if m > len(initial):
        raise ValueError(f"fleet of {m} exceeds {len(initial)} targets; clusters would be empty")
    plan = start_dynamic(initial, m, depot, seed)
    starts = plan.fleet.positions
    alloc, plan = assign_dynamic_iteration(plan, merge_radius=merge_radius)
    cost = continuation_cost(alloc, starts)
    if arrivals:
        starts = plan.fleet.positions
        alloc, plan = assign_dynamic_iteration(
            plan, [ArrivalEvent(0.0, tuple(arrivals))], merge_radius=merge_radius
        )
        cost += continuation_cost(alloc, starts)
    return cost
