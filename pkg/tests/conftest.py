import numpy as np
import pytest

from loiterplan.core import Depot, Point, Target


def make_targets(xy, radius=3.0, first_id=0):
    return [Target(first_id + i, Point(float(x), float(y)), radius) for i, (x, y) in enumerate(xy)]


def uniform_targets(rng, n, half=1000.0, radius=3.0, first_id=0):
    return make_targets(rng.uniform(-half, half, size=(n, 2)), radius, first_id)


@pytest.fixture
def origin():
    return Depot(Point(0.0, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def transition_instance(rng, p):
    """Random transfer from a moving start onto a loiter state of a circle at the origin."""
    from loiterplan.dynamics import PlanarState, v_max

    r = float(rng.uniform(2.0, 10.0))
    v_loiter = v_max(p, r)
    d = float(rng.uniform(10.0, 100.0))
    bearing, heading, angle = rng.uniform(0, 2 * np.pi, 3)
    speed = float(rng.uniform(0.0, v_loiter))
    start = PlanarState(
        Point(d * np.cos(bearing), d * np.sin(bearing)), (speed * np.cos(heading), speed * np.sin(heading))
    )
    sgn = 1.0 if rng.random() < 0.5 else -1.0
    goal = PlanarState(
        Point(r * np.cos(angle), r * np.sin(angle)),
        (-sgn * v_loiter * np.sin(angle), sgn * v_loiter * np.cos(angle)),
    )
    return start, goal, max(v_loiter, speed)


def random_scenario_dict(rng):
    """Scenario with random targets, arrivals and removals, as parsed from JSON."""
    n = int(rng.integers(1, 25))
    m = int(rng.integers(1, 6))
    spread = float(rng.choice([20.0, 200.0, 2000.0]))
    ids = [int(i) for i in rng.permutation(1000)[: n + 40]]
    targets = [
        {"id": ids.pop(), "x": float(x), "y": float(y), "loiter_radius": float(rng.uniform(1, 5))}
        for x, y in rng.uniform(-spread, spread, (n, 2))
    ]
    known = [t["id"] for t in targets]
    events, t = [], 0.0
    for _ in range(int(rng.integers(0, 6))):
        t += float(rng.exponential(30.0)) * (rng.random() < 0.8)
        add = [
            {"id": ids.pop(), "x": float(x), "y": float(y)}
            for x, y in rng.uniform(-spread, spread, (int(rng.integers(0, 4)), 2))
        ]
        remove = sorted({int(i) for i in rng.choice(known, size=int(rng.integers(0, 3)))}) if known else []
        known += [a["id"] for a in add]
        events.append({"time": t, "add": add, "remove": remove})
    merge = None if rng.random() < 0.5 else float(rng.uniform(0, 30))
    return {
        "version": 1,
        "depot": {"x": float(rng.uniform(-50, 50)), "y": 0.0},
        "fleet_size": m,
        "seed": int(rng.integers(0, 2**31)),
        "targets": targets,
        "events": events,
        "config": {"merge_radius": merge},
    }


def coverage_violations(scenario, rounds):
    """Problems with how the emitted tours cover the scenario's targets (empty list when fine)."""
    problems = []
    every = {t.id for t in scenario.targets} | {t.id for ev in scenario.events for t in ev.added}
    removal_time = {}
    for ev in scenario.events:
        for tid in ev.removed:
            removal_time.setdefault(tid, ev.time)
    seen = {}
    for rnd in rounds:
        ids = rnd.allocation.covered_ids()
        for tid in ids:
            if tid in seen:
                problems.append(f"target {tid} covered in rounds {seen[tid]} and {rnd.index}")
            seen[tid] = rnd.index
            if tid not in every:
                problems.append(f"unknown target {tid} in round {rnd.index}")
            if tid in removal_time and removal_time[tid] <= rnd.start_time:
                problems.append(f"removed target {tid} still flown in round {rnd.index}")
        if len(rnd.allocation.tours) != scenario.fleet_size:
            problems.append(f"round {rnd.index} has {len(rnd.allocation.tours)} tours")
    for tid in every - set(seen):
        if tid not in removal_time:
            problems.append(f"target {tid} never covered")
    return problems
