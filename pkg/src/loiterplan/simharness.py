"""Seeded Monte Carlo studies.

Three experiments are supported:

* ``cost-vs-fleet``: mean path cost per vehicle of the static planner over
  uniform target fields, for every (n, m) pair.
* ``holonomic-ratio``: minimum transfer time of the quadcopter onto a loiter
  circle divided by the straight-line time of a holonomic vehicle flying at
  the loiter speed.
* ``dynamic-ratio``: total path length of static replanning (return to depot,
  replan) over that of dynamic absorption, for r late-arriving targets.

Trial ``i`` draws from ``SeedSequence([seed, tag, ..., i])`` so results do
not depend on the order or process in which trials run.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .allocation import assign_static, procedure1_total_cost, procedure2_total_cost
from .core import Depot, Point, Target, team_cost, tour_cost
from .dynamics import PlanarState, QuadParams, v_max
from .trajectory import (
    DEFAULT_ENTRIES,
    DEFAULT_SEGMENTS,
    TransitionSolveError,
    holonomic_transition_time,
    transition_to_target,
)

__all__ = [
    "ExperimentKind",
    "ExperimentConfig",
    "StudyResult",
    "run_cost_study",
    "run_holonomic_study",
    "run_dynamic_study",
    "run_study",
    "write_study",
]


class ExperimentKind(str, Enum):
    COST = "cost-vs-fleet"
    HOLONOMIC = "holonomic-ratio"
    DYNAMIC = "dynamic-ratio"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    n: tuple[int, ...] = (10, 20, 40)
    m: tuple[int, ...] = (2, 4, 8)
    arrivals: tuple[int, ...] = (8, 16, 32)
    region: tuple[float, float, float, float] = (-1000.0, 1000.0, -1000.0, 1000.0)
    trials: int = 200
    seed: int = 0
    loiter_radius: float = 3.0
    depot: tuple[float, float] = (0.0, 0.0)
    quad: QuadParams = field(default_factory=QuadParams)
    merge_radius: float | None = None
    # holonomic-ratio only
    distance_range: tuple[float, float] = (10.0, 100.0)
    distance_bins: int = 6
    entries: int = DEFAULT_ENTRIES
    segments: int = DEFAULT_SEGMENTS
    # dynamic-ratio only
    histogram_bins: int = 20

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        for name in ("n", "m", "arrivals"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        object.__setattr__(self, "region", tuple(float(v) for v in self.region))
        object.__setattr__(self, "distance_range", tuple(float(v) for v in self.distance_range))
        object.__setattr__(self, "depot", tuple(float(v) for v in self.depot))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        x0, x1, y0, y1 = self.region
        if not (x0 < x1 and y0 < y1):
            raise ValueError("region must satisfy min < max on both axes")
        if not self.loiter_radius > 0:
            raise ValueError("loiter_radius must be > 0")
        if self.kind is ExperimentKind.COST and (not self.n or not self.m):
            raise ValueError("cost study needs at least one n and one m")
        if self.kind is ExperimentKind.DYNAMIC and (len(self.n) != 1 or len(self.m) != 1):
            raise ValueError("dynamic study takes a single n and a single m")
        if any(v < 0 for v in self.arrivals):
            raise ValueError("arrival counts must be >= 0")
        lo, hi = self.distance_range
        if not (self.loiter_radius <= lo < hi):
            raise ValueError("distance_range must start at or beyond the loiter radius")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass
class StudyResult:
    config: ExperimentConfig
    columns: tuple[str, ...]
    records: list[dict[str, Any]]
    aggregate: dict[str, Any]


def _rng(cfg: ExperimentConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, *key]))


def _uniform_targets(rng: np.random.Generator, cfg: ExperimentConfig, count: int, first_id: int = 0) -> list[Target]:
    x0, x1, y0, y1 = cfg.region
    xs = rng.uniform(x0, x1, count)
    ys = rng.uniform(y0, y1, count)
    return [Target(first_id + i, Point(float(x), float(y)), cfg.loiter_radius) for i, (x, y) in enumerate(zip(xs, ys))]


def _run_trials(fn: Callable, jobs: Sequence[tuple], workers: int) -> list:
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs), chunksize=max(1, len(jobs) // (4 * workers))))


def _summary(values: Iterable[float]) -> dict[str, float]:
    a = np.asarray(list(values), float)
    if a.size == 0:
        return {"count": 0, "mean": math.nan, "min": math.nan, "max": math.nan}
    return {"count": int(a.size), "mean": float(a.mean()), "min": float(a.min()), "max": float(a.max())}


# -- cost vs fleet size ------------------------------------------------------

COST_COLUMNS = ("n", "m", "trial", "team_cost", "cost_per_vehicle", "min_vehicle_cost", "max_vehicle_cost")


def _cost_trial(cfg: ExperimentConfig, n: int, m: int, trial: int) -> dict[str, Any]:
    # the target field depends on (n, trial) only, so fleet sizes are compared on identical fields
    targets = _uniform_targets(_rng(cfg, 1, n, trial), cfg, n)
    depot = Depot(Point(*cfg.depot))
    alloc = assign_static(targets, m, depot, seed=trial, merge_radius=cfg.merge_radius)
    per_vehicle = [tour_cost(t, depot, alloc.sites) for t in alloc.tours]
    total = team_cost(alloc, depot)
    return {
        "n": n,
        "m": m,
        "trial": trial,
        "team_cost": total,
        "cost_per_vehicle": total / m,
        "min_vehicle_cost": min(per_vehicle),
        "max_vehicle_cost": max(per_vehicle),
    }


def run_cost_study(cfg: ExperimentConfig, workers: int = 1) -> StudyResult:
    if cfg.kind is not ExperimentKind.COST:
        raise ValueError(f"expected a {ExperimentKind.COST.value} config")
    jobs = [(cfg, n, m, i) for n in cfg.n for m in cfg.m if m <= n for i in range(cfg.trials)]
    records = _run_trials(_cost_trial, jobs, workers)
    return StudyResult(cfg, COST_COLUMNS, records, aggregate_cost(records))


def aggregate_cost(records: Sequence[dict]) -> dict[str, Any]:
    table = []
    keys = sorted({(r["n"], r["m"]) for r in records})
    for n, m in keys:
        vals = [r["cost_per_vehicle"] for r in records if r["n"] == n and r["m"] == m]
        table.append({"n": n, "m": m, **_summary(vals)})
    return {"cost_per_vehicle": table}


# -- holonomic ratio ---------------------------------------------------------

HOLONOMIC_COLUMNS = (
    "trial",
    "distance",
    "start_x",
    "start_y",
    "heading",
    "quad_time",
    "holonomic_time",
    "ratio",
    "entry_index",
    "status",
)


def _holonomic_trial(cfg: ExperimentConfig, trial: int) -> dict[str, Any]:
    rng = _rng(cfg, 2, trial)
    lo, hi = cfg.distance_range
    d = float(rng.uniform(lo, hi))
    bearing = float(rng.uniform(0.0, 2 * math.pi))
    heading = float(rng.uniform(0.0, 2 * math.pi))
    target = Target(0, Point(0.0, 0.0), cfg.loiter_radius)
    speed = v_max(cfg.quad, cfg.loiter_radius)
    start = Point(d * math.cos(bearing), d * math.sin(bearing))
    row: dict[str, Any] = {
        "trial": trial,
        "distance": d,
        "start_x": start.x,
        "start_y": start.y,
        "heading": heading,
        "quad_time": math.nan,
        "holonomic_time": math.nan,
        "ratio": math.nan,
        "entry_index": -1,
    }
    if d - cfg.loiter_radius <= 1e-9:
        row["status"] = "degenerate"
        return row
    # the holonomic vehicle flies straight to the closest point of the circle
    nearest = Point(cfg.loiter_radius * math.cos(bearing), cfg.loiter_radius * math.sin(bearing))
    t_h = holonomic_transition_time(start, nearest, speed)
    exit_state = PlanarState(start, (speed * math.cos(heading), speed * math.sin(heading)))
    try:
        traj, cand = transition_to_target(exit_state, target, cfg.quad, cfg.entries, cfg.segments)
    except TransitionSolveError:
        row["holonomic_time"] = t_h
        row["status"] = "solver-failed"
        return row
    row.update(quad_time=cand.time, holonomic_time=t_h, ratio=cand.time / t_h, entry_index=cand.index, status="ok")
    return row


def run_holonomic_study(cfg: ExperimentConfig, workers: int = 1) -> StudyResult:
    if cfg.kind is not ExperimentKind.HOLONOMIC:
        raise ValueError(f"expected a {ExperimentKind.HOLONOMIC.value} config")
    records = _run_trials(_holonomic_trial, [(cfg, i) for i in range(cfg.trials)], workers)
    return StudyResult(cfg, HOLONOMIC_COLUMNS, records, aggregate_holonomic(records, cfg))


def aggregate_holonomic(records: Sequence[dict], cfg: ExperimentConfig) -> dict[str, Any]:
    ok = [r for r in records if r["status"] == "ok"]
    edges = np.linspace(*cfg.distance_range, cfg.distance_bins + 1)
    bins = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        last = hi == edges[-1]
        vals = [r["ratio"] for r in ok if lo <= r["distance"] < hi or (last and r["distance"] == hi)]
        bins.append({"distance_lo": float(lo), "distance_hi": float(hi), **_summary(vals)})
    return {
        "ratio": _summary(r["ratio"] for r in ok),
        "by_distance": bins,
        "bin_edges": [float(e) for e in edges],
        "excluded": {
            "degenerate": sum(r["status"] == "degenerate" for r in records),
            "solver_failed": sum(r["status"] == "solver-failed" for r in records),
        },
    }


# -- dynamic ratio -----------------------------------------------------------

DYNAMIC_COLUMNS = ("n", "m", "r", "trial", "procedure1", "procedure2", "rho")


def _dynamic_trial(cfg: ExperimentConfig, r: int, trial: int) -> dict[str, Any]:
    n, m = cfg.n[0], cfg.m[0]
    rng = _rng(cfg, 3, r, trial)
    initial = _uniform_targets(rng, cfg, n)
    arrivals = _uniform_targets(rng, cfg, r, first_id=n)
    depot = Depot(Point(*cfg.depot))
    p1 = procedure1_total_cost(initial, arrivals, m, depot, seed=trial, merge_radius=cfg.merge_radius)
    p2 = procedure2_total_cost(initial, arrivals, m, depot, seed=trial, merge_radius=cfg.merge_radius)
    return {"n": n, "m": m, "r": r, "trial": trial, "procedure1": p1, "procedure2": p2, "rho": p1 / p2}


def run_dynamic_study(cfg: ExperimentConfig, workers: int = 1) -> StudyResult:
    if cfg.kind is not ExperimentKind.DYNAMIC:
        raise ValueError(f"expected a {ExperimentKind.DYNAMIC.value} config")
    if cfg.m[0] > cfg.n[0]:
        raise ValueError("fleet larger than the initial target set")
    jobs = [(cfg, r, i) for r in cfg.arrivals for i in range(cfg.trials)]
    records = _run_trials(_dynamic_trial, jobs, workers)
    return StudyResult(cfg, DYNAMIC_COLUMNS, records, aggregate_dynamic(records, cfg))


def aggregate_dynamic(records: Sequence[dict], cfg: ExperimentConfig) -> dict[str, Any]:
    out = []
    for r in sorted({rec["r"] for rec in records}):
        rho = np.array([rec["rho"] for rec in records if rec["r"] == r])
        counts, edges = np.histogram(rho, bins=cfg.histogram_bins)
        out.append({
            "r": r,
            **_summary(rho),
            "histogram": {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]},
        })
    return {"rho": out}


_RUNNERS = {
    ExperimentKind.COST: run_cost_study,
    ExperimentKind.HOLONOMIC: run_holonomic_study,
    ExperimentKind.DYNAMIC: run_dynamic_study,
}


def run_study(cfg: ExperimentConfig, workers: int = 1) -> StudyResult:
    return _RUNNERS[cfg.kind](cfg, workers)


# -- persistence ---------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_groups(result: StudyResult) -> dict[tuple[int, int], list[dict]]:
    cfg = result.config
    if cfg.kind is ExperimentKind.HOLONOMIC:
        return {(1, 1): result.records}
    groups: dict[tuple[int, int], list[dict]] = {}
    for rec in result.records:
        groups.setdefault((rec["n"], rec["m"]), []).append(rec)
    return groups


def _json_safe(obj: Any) -> Any:
    """Replace NaN/inf (e.g. statistics of an empty bin) with null."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_study(result: StudyResult, out_dir: str | Path) -> list[Path]:
    """Per-trial CSVs named ``<experiment>-<n>-<m>-<seed>.csv`` plus ``<experiment>-<seed>.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    written = []
    for (n, m), recs in sorted(_csv_groups(result).items()):
        path = out / f"{cfg.kind.value}-{n}-{m}-{cfg.seed}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(result.columns)
            for rec in recs:
                w.writerow([_fmt(rec[c]) for c in result.columns])
        written.append(path)
    agg_path = out / f"{cfg.kind.value}-{cfg.seed}.json"
    payload = {"experiment": cfg.kind.value, "config": cfg.to_dict(), **result.aggregate}
    agg_path.write_text(json.dumps(_json_safe(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")
    written.append(agg_path)
    return written
