"""Command-line entry point: ``loiterplan {allocate,trajectory,study}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .dynamics import QuadParams
from .scenario import Scenario, ScenarioError, parse_scenario, run_mission
from .simharness import ExperimentConfig, ExperimentKind, run_study, write_study
from .trajectory import (
    InfeasibleBoundaryError,
    TransitionSolveError,
    fixed6,
    tour_trajectory,
    write_trajectory_csv,
)

log = logging.getLogger("loiterplan")

TOUR_COST_COLUMNS = ("round", "vehicle", "start_time", "sites", "targets", "cost")
OVERLAY_COLUMNS = ("vehicle", "kind", "seq", "x", "y")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _scenario(args) -> Scenario:
    sc = parse_scenario(args.scenario)
    return sc.with_overrides(
        seed=args.seed,
        merge_radius=args.merge_radius,
        entries=getattr(args, "entries", None),
        segments=getattr(args, "segments", None),
    )


def cmd_allocate(scenario: Scenario, out_dir: Path) -> list[Path]:
    """Per-vehicle tour files (one entry per mission round) and a cost summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    rounds = run_mission(scenario)
    written = []
    for vid in range(scenario.fleet_size):
        entries = []
        for rnd in rounds:
            tour = rnd.allocation.tours[vid]
            entries.append({
                "round": rnd.index,
                "start_time": rnd.start_time,
                "start": [rnd.starts[vid].x, rnd.starts[vid].y],
                "sequence": list(tour.sequence),
                "covers": [list(rnd.allocation.covered(s)) for s in tour.sequence],
                "cost": rnd.costs[vid],
            })
        path = out_dir / f"tour-{vid}.json"
        _dump_json({"vehicle": vid, "seed": scenario.seed, "rounds": entries}, path)
        written.append(path)
    path = out_dir / "tour-costs.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TOUR_COST_COLUMNS)
        for rnd in rounds:
            for tour in rnd.allocation.tours:
                covered = [tid for s in tour.sequence for tid in rnd.allocation.covered(s)]
                w.writerow([
                    rnd.index,
                    tour.vehicle_id,
                    repr(rnd.start_time),
                    " ".join(map(str, tour.sequence)),
                    " ".join(map(str, covered)),
                    repr(rnd.costs[tour.vehicle_id]),
                ])
    written.append(path)
    return written


def cmd_trajectory(scenario: Scenario, out_dir: Path) -> tuple[list[Path], list[dict]]:
    """Trajectories for the first-round tours plus an overlay of tour polylines and flight paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    first = run_mission(scenario)[0]
    alloc = first.allocation
    written, failures = [], []
    overlay_rows = []
    for tour in alloc.tours:
        vid = tour.vehicle_id
        poly = [scenario.depot.position] + [alloc.sites[s].position for s in tour.sequence]
        overlay_rows += [(vid, "tour", i, p.x, p.y) for i, p in enumerate(poly)]
        try:
            traj = tour_trajectory(tour, scenario.depot, alloc.sites, scenario.quad, scenario.entries, scenario.segments)
        except (TransitionSolveError, InfeasibleBoundaryError) as exc:
            diag = getattr(exc, "diagnostics", {})
            failures.append({
                "vehicle": vid,
                "error": str(exc),
                "diagnostics": {k: v for k, v in diag.items() if isinstance(v, (int, float, str, list))},
            })
            continue
        path = out_dir / f"trajectory-{vid}.csv"
        write_trajectory_csv(traj, path)
        written.append(path)
        overlay_rows += [(vid, "flight", i, x, y) for i, (x, y) in enumerate(traj.states[:, :2])]
    path = out_dir / "overlay.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OVERLAY_COLUMNS)
        for vid, kind, i, x, y in overlay_rows:
            w.writerow([vid, kind, i, fixed6(x), fixed6(y)])
    written.append(path)
    if failures:
        path = out_dir / "failures.json"
        _dump_json({"failures": failures}, path)
        written.append(path)
    return written, failures


def load_study_config(kind: str, path: str | None, **overrides) -> ExperimentConfig:
    data: dict = {}
    if path:
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError("study config must be a JSON object")
        data.pop("kind", None)
    if "quad" in data:
        data["quad"] = QuadParams(**data["quad"])
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(kind=ExperimentKind(kind), **data)
    except TypeError as exc:
        raise ValueError(f"study config: {exc}") from None


def cmd_study(kind: str, config: ExperimentConfig, out_dir: Path, workers: int = 1) -> list[Path]:
    result = run_study(config, workers=workers)
    return write_study(result, out_dir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loiterplan", description="Multi-quadcopter loiter tour planning.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--merge-radius", type=float, default=None)

    a = sub.add_parser("allocate", help="assign targets and write tours")
    common(a)
    t = sub.add_parser("trajectory", help="generate flight trajectories for the allocation")
    common(t)
    t.add_argument("--entries", type=int, default=None, help="entry points sampled per loiter circle")
    t.add_argument("--segments", type=int, default=None, help="collocation segments per transition")
    s = sub.add_parser("study", help="run a Monte Carlo study")
    s.add_argument("kind", choices=[k.value for k in ExperimentKind])
    common(s, scenario=False)
    s.add_argument("--config", default=None, help="JSON file with study settings")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--entries", type=int, default=None)
    s.add_argument("--segments", type=int, default=None)
    s.add_argument("--workers", type=int, default=1)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "allocate":
            paths = cmd_allocate(_scenario(args), args.out)
        elif args.command == "trajectory":
            paths, failures = cmd_trajectory(_scenario(args), args.out)
            if failures:
                for f in failures:
                    print(f"vehicle {f['vehicle']}: {f['error']}", file=sys.stderr)
                return 1
        else:
            cfg = load_study_config(
                args.kind,
                args.config,
                seed=args.seed,
                trials=args.trials,
                merge_radius=args.merge_radius,
                entries=args.entries,
                segments=args.segments,
            )
            paths = cmd_study(args.kind, cfg, args.out, workers=args.workers)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
