"""Exit criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python tests/test_acceptance.py``.
"""

import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import root

sys.path.insert(0, str(Path(__file__).parent))

from conftest import coverage_violations, random_scenario_dict, transition_instance  # noqa: E402
from loiterplan.collocation import trapezoid_defects  # noqa: E402
from loiterplan.core import Point  # noqa: E402
from loiterplan.dynamics import QuadParams, TiltSolution, a_max, drag_factor, force_balance_residual, v_max  # noqa: E402
from loiterplan.dynamics import PlanarState  # noqa: E402
from loiterplan.scenario import run_mission, scenario_from_dict  # noqa: E402
from loiterplan.simharness import ExperimentConfig, ExperimentKind, run_study, write_study  # noqa: E402
from loiterplan.trajectory import min_time_transition  # noqa: E402
from loiterplan.tsp import MetricGraph, brute_force_tsp, christofides  # noqa: E402

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

WORKERS = max(1, min(4, os.cpu_count() or 1))


def _line(name: str, ok: bool, detail: str, elapsed: float) -> str:
    return f"{'PASS' if ok else 'FAIL'} | {name} | {detail} | {elapsed:.1f}s"


def christofides_quality():
    rng = np.random.default_rng(20240601)
    worst, inexact = 0.0, 0
    for _ in range(200):
        n = int(rng.integers(3, 11))
        g = MetricGraph.from_points({i: Point(*xy) for i, xy in enumerate(rng.uniform(-1000, 1000, (n, 2)))})
        approx = christofides(g)
        inexact += not approx.exact_matching
        opt = brute_force_tsp(g).length
        worst = max(worst, approx.length / opt)
        if approx.length > 1.5 * opt + 1e-9:
            return False, f"instance with n={n} exceeded 1.5x optimum ({approx.length / opt:.4f})"
    return inexact == 0, f"200 instances, worst ratio {worst:.4f} (bound 1.5), inexact matchings {inexact}"


def _tilt(p, v):
    def eqs(x):
        phi, theta = x
        return [
            p.max_thrust * math.cos(phi) * math.cos(theta) - p.mass * p.gravity,
            p.max_thrust * math.sin(theta) - 0.5 * p.drag_coeff * v * v,
        ]

    phi, theta = root(eqs, [0.3, 0.05], method="hybr", tol=1e-14).x
    return TiltSolution(float(phi), float(theta), v)


def v_max_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        m, g = rng.uniform(0.3, 5.0), rng.uniform(5.0, 15.0)
        p = QuadParams(mass=m, max_thrust=m * g * rng.uniform(1.05, 3.0), drag_coeff=rng.uniform(0.0, 1.5), gravity=g)
        r = float(rng.uniform(0.5, 20.0))
        v = v_max(p, r)
        worst = max(worst, float(np.linalg.norm(force_balance_residual(p, r, _tilt(p, v)))))
    return worst < 1e-9, f"100 draws, max residual norm {worst:.2e} N (tol 1e-9)"


def trajectory_feasibility():
    p = QuadParams()
    rng = np.random.default_rng(99)
    worst_defect = worst_boundary = worst_change = 0.0
    for i in range(50):
        start, goal, cap = transition_instance(rng, p)
        tf = {}
        for segments in (20, 40):
            try:
                traj = min_time_transition(start, goal, p, segments, speed_limit=cap)
            except Exception as exc:  # noqa: BLE001
                return False, f"instance {i} with {segments} segments failed: {exc}"
            info = traj.info
            defect = np.max(np.abs(trapezoid_defects(info["knot_times"], info["knot_states"], info["controls"], drag_factor(p))))
            boundary = max(
                np.max(np.abs(info["knot_states"][0] - start.as_array())),
                np.max(np.abs(info["knot_states"][-1] - goal.as_array())),
            )
            worst_defect = max(worst_defect, float(defect))
            worst_boundary = max(worst_boundary, float(boundary))
            tf[segments] = info["tf"]
        worst_change = max(worst_change, abs(tf[40] - tf[20]) / tf[40])
    ok = worst_defect < 1e-6 and worst_boundary < 1e-6 and worst_change < 0.02
    return ok, (
        f"50 instances, max defect {worst_defect:.1e}, max boundary {worst_boundary:.1e}, "
        f"max 20->40 change {100 * worst_change:.2f}%"
    )


def bang_bang_oracle():
    p = QuadParams(drag_coeff=0.0)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        d = float(rng.uniform(1.0, 200.0))
        heading = float(rng.uniform(0, 2 * math.pi))
        a = Point(*rng.uniform(-100, 100, 2))
        b = Point(a.x + d * math.cos(heading), a.y + d * math.sin(heading))
        tf = min_time_transition(PlanarState(a, (0.0, 0.0)), PlanarState(b, (0.0, 0.0)), p).info["tf"]
        worst = max(worst, abs(tf / (2 * math.sqrt(d / a_max(p))) - 1))
    return worst < 0.01, f"20 rest-to-rest instances, max relative error {100 * worst:.3f}% (tol 1%)"


def cost_trend():
    cfg = ExperimentConfig(ExperimentKind.COST, n=(40,), m=(2, 4, 8), trials=500, seed=1)
    table = run_study(cfg, workers=WORKERS).aggregate["cost_per_vehicle"]
    means = [row["mean"] for row in table]
    ok = all(a > b for a, b in zip(means, means[1:]))
    return ok, "n=40, 500 trials, mean cost/vehicle " + ", ".join(
        f"m={row['m']}: {row['mean']:.0f}" for row in table
    )


def holonomic_ratio():
    cfg = ExperimentConfig(ExperimentKind.HOLONOMIC, trials=200, seed=1)
    agg = run_study(cfg, workers=WORKERS).aggregate
    s, excl = agg["ratio"], agg["excluded"]
    ok = s["count"] == 200 and s["min"] >= 1.0 and s["max"] <= 3.5 and s["mean"] <= 3.0
    return ok, (
        f"{s['count']} solved, ratio min {s['min']:.3f} mean {s['mean']:.3f} max {s['max']:.3f} "
        f"(need [1, 3.5], mean <= 3), failures {excl['solver_failed']}, degenerate {excl['degenerate']}"
    )


def dynamic_ratio():
    cfg = ExperimentConfig(ExperimentKind.DYNAMIC, n=(40,), m=(4,), arrivals=(8, 16, 32), trials=200, seed=1)
    rows = run_study(cfg, workers=WORKERS).aggregate["rho"]
    ok = all(row["mean"] > 1.0 for row in rows)
    return ok, "n=40 m=4, 200 trials, mean rho " + ", ".join(f"r={row['r']}: {row['mean']:.3f}" for row in rows)


def determinism():
    configs = [
        ExperimentConfig(ExperimentKind.COST, n=(10, 40), m=(2, 8), trials=20, seed=11),
        ExperimentConfig(ExperimentKind.DYNAMIC, n=(40,), m=(4,), arrivals=(0, 16), trials=20, seed=11),
        ExperimentConfig(ExperimentKind.HOLONOMIC, trials=4, entries=4, seed=11),
    ]
    compared = 0
    with tempfile.TemporaryDirectory() as tmp:
        for cfg in configs:
            a = write_study(run_study(cfg, workers=1), Path(tmp) / "serial")
            b = write_study(run_study(cfg, workers=2), Path(tmp) / "parallel")
            for x, y in zip(a, b):
                if x.name != y.name or x.read_bytes() != y.read_bytes():
                    return False, f"{x.name} differs between 1 and 2 workers"
                compared += 1
    return True, f"{compared} study files byte-identical across 1 and 2 workers"


def coverage():
    total_rounds = 0
    for case in range(1000):
        sc = scenario_from_dict(random_scenario_dict(np.random.default_rng([2024, case])))
        rounds = run_mission(sc)
        total_rounds += len(rounds)
        problems = coverage_violations(sc, rounds)
        if problems:
            return False, f"case {case}: {problems[0]}"
    return True, f"1000 fuzzed scenarios, {total_rounds} rounds, no orphaned or duplicated targets"


CRITERIA = [
    ("christofides within 1.5x of optimum", christofides_quality),
    ("loiter speed satisfies force balance", v_max_oracle),
    ("transition feasibility and refinement", trajectory_feasibility),
    ("bang-bang oracle without drag", bang_bang_oracle),
    ("cost per vehicle falls with fleet size", cost_trend),
    ("quadcopter/holonomic time ratio", holonomic_ratio),
    ("dynamic replanning ratio above one", dynamic_ratio),
    ("determinism across parallelism", determinism),
    ("coverage under arrivals and removals", coverage),
]


def _evaluate(name, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    return ok, _line(name, ok, detail, time.perf_counter() - t0)


@pytest.mark.parametrize("name, fn", CRITERIA, ids=[fn.__name__ for _, fn in CRITERIA])
def test_criterion(name, fn, capsys):
    ok, line = _evaluate(name, fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [_evaluate(name, fn) for name, fn in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
