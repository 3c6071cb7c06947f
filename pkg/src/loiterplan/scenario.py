"""Scenario files and the round-by-round mission they describe.

A scenario is a JSON document::

    {
      "version": 1,
      "depot": {"x": 0, "y": 0},
      "fleet_size": 3,
      "seed": 7,
      "quad": {"mass": 1.5, "max_thrust": 25, "drag_coeff": 0.5, "gravity": 9.81},
      "targets": [{"id": 1, "x": 10, "y": 4, "loiter_radius": 3}],
      "events": [{"time": 120, "add": [{"id": 9, "x": 0, "y": 50}], "remove": [1]}],
      "config": {"merge_radius": null, "kmeans_max_iter": 100, "entries": 8, "segments": 20}
    }

Only ``version``, ``depot``, ``fleet_size`` and ``targets`` are required.
Unknown keys are rejected anywhere in the document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .allocation import ArrivalEvent, assign_dynamic_iteration, start_dynamic
from .core import Allocation, Depot, Point, Target, tour_cost
from .dynamics import InfeasibleFlightError, QuadParams, v_max
from .trajectory import DEFAULT_ENTRIES, DEFAULT_SEGMENTS

__all__ = [
    "SCENARIO_VERSION",
    "Scenario",
    "ScenarioError",
    "MissionRound",
    "parse_scenario",
    "scenario_from_dict",
    "run_mission",
]

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _PointModel(_Strict):
    x: float = Field(allow_inf_nan=False)
    y: float = Field(allow_inf_nan=False)


class _TargetModel(_Strict):
    id: int
    x: float = Field(allow_inf_nan=False)
    y: float = Field(allow_inf_nan=False)
    loiter_radius: float = Field(3.0, gt=0, allow_inf_nan=False)


class _QuadModel(_Strict):
    mass: float = Field(1.5, gt=0)
    max_thrust: float = Field(25.0, gt=0)
    drag_coeff: float = Field(0.5, ge=0)
    gravity: float = Field(9.81, gt=0)


class _EventModel(_Strict):
    time: float = Field(ge=0, allow_inf_nan=False)
    add: list[_TargetModel] = []
    remove: list[int] = []


class _ConfigModel(_Strict):
    merge_radius: Optional[float] = Field(None, ge=0)
    kmeans_max_iter: int = Field(100, ge=1)
    entries: int = Field(DEFAULT_ENTRIES, ge=2)
    segments: int = Field(DEFAULT_SEGMENTS, ge=10)


class _ScenarioModel(_Strict):
    version: int
    depot: _PointModel
    fleet_size: int = Field(ge=1)
    seed: int = Field(0, ge=0)
    quad: _QuadModel = _QuadModel()
    targets: list[_TargetModel] = Field(min_length=1)
    events: list[_EventModel] = []
    config: _ConfigModel = _ConfigModel()

    @field_validator("version")
    @classmethod
    def _known_version(cls, v: int) -> int:
        if v != SCENARIO_VERSION:
            raise ValueError(f"unsupported scenario version {v} (expected {SCENARIO_VERSION})")
        return v


@dataclass(frozen=True)
class Scenario:
    depot: Depot
    fleet_size: int
    targets: tuple[Target, ...]
    events: tuple[ArrivalEvent, ...] = ()
    quad: QuadParams = QuadParams()
    seed: int = 0
    merge_radius: float | None = None
    kmeans_max_iter: int = 100
    entries: int = DEFAULT_ENTRIES
    segments: int = DEFAULT_SEGMENTS

    def with_overrides(self, **changes) -> "Scenario":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _target(t: _TargetModel) -> Target:
    return Target(t.id, Point(t.x, t.y), t.loiter_radius)


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def scenario_from_dict(data: dict) -> Scenario:
    try:
        model = _ScenarioModel.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(_format_validation(exc)) from None

    seen: set[int] = set()
    for t in model.targets:
        if t.id in seen:
            raise ScenarioError(f"targets: duplicate target id {t.id}")
        seen.add(t.id)
    last = -1.0
    for i, ev in enumerate(model.events):
        if ev.time < last:
            raise ScenarioError(f"events.{i}.time: events must be sorted by time ({ev.time} after {last})")
        last = ev.time
        for tid in ev.remove:
            if tid not in seen:
                raise ScenarioError(f"events.{i}.remove: unknown target id {tid}")
        for t in ev.add:
            if t.id in seen:
                raise ScenarioError(f"events.{i}.add: duplicate target id {t.id}")
            seen.add(t.id)
    try:
        quad = QuadParams(**model.quad.model_dump())
    except InfeasibleFlightError as exc:
        raise ScenarioError(f"quad: {exc}") from None

    cfg = model.config
    return Scenario(
        depot=Depot(Point(model.depot.x, model.depot.y)),
        fleet_size=model.fleet_size,
        targets=tuple(_target(t) for t in model.targets),
        events=tuple(
            ArrivalEvent(ev.time, tuple(_target(t) for t in ev.add), tuple(ev.remove)) for ev in model.events
        ),
        quad=quad,
        seed=model.seed,
        merge_radius=cfg.merge_radius,
        kmeans_max_iter=cfg.kmeans_max_iter,
        entries=cfg.entries,
        segments=cfg.segments,
    )


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a JSON object")
    try:
        return scenario_from_dict(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class MissionRound:
    index: int
    start_time: float
    starts: tuple[Point, ...]
    allocation: Allocation
    costs: tuple[float, ...]

    @property
    def duration_distance(self) -> float:
        return max(self.costs, default=0.0)


def run_mission(scenario: Scenario) -> list[MissionRound]:
    """Fly rounds until every reported target has been scanned.

    Each round lasts as long as its longest tour takes at the loiter speed of
    the tightest circle in the scenario; events stamped within a round are
    handled when the next round is planned. When the fleet is idle, the clock
    jumps to the next event.
    """
    all_targets = list(scenario.targets) + [t for ev in scenario.events for t in ev.added]
    cruise = v_max(scenario.quad, min(t.loiter_radius for t in all_targets))
    plan = start_dynamic(
        scenario.targets, scenario.fleet_size, scenario.depot, scenario.seed, kmeans_max_iter=scenario.kmeans_max_iter
    )
    pending = list(scenario.events)
    clock = 0.0
    rounds: list[MissionRound] = []
    while True:
        due = [ev for ev in pending if ev.time <= clock]
        pending = pending[len(due):]
        outstanding = any(tid not in plan.visited for tid in plan.targets)
        if rounds and not due and not outstanding:
            if not pending:
                break
            clock = pending[0].time
            continue
        starts = plan.fleet.positions
        alloc, plan = assign_dynamic_iteration(plan, due, merge_radius=scenario.merge_radius)
        costs = tuple(tour_cost(t, Depot(starts[t.vehicle_id]), alloc.sites) for t in alloc.tours)
        rounds.append(MissionRound(len(rounds) + 1, clock, starts, alloc, costs))
        clock += max(costs, default=0.0) / cruise
    return rounds
