"""Flight paths that realize a tour: full-circle loiters joined by minimum-time transfers."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .collocation import CollocationProblem, solve_min_time
from .core import Depot, Point, Target, Tour, dist
from .dynamics import PlanarState, QuadParams, a_max, drag_factor, straight_speed_bound, v_max

__all__ = [
    "Direction",
    "Phase",
    "Trajectory",
    "EntryCandidate",
    "TransitionSolveError",
    "InfeasibleBoundaryError",
    "SAMPLE_RATE",
    "DEFECT_TOL",
    "DEFAULT_ENTRIES",
    "DEFAULT_SEGMENTS",
    "loiter_trajectory",
    "min_time_transition",
    "transition_candidates",
    "transition_to_target",
    "tour_trajectory",
    "holonomic_transition_time",
    "write_trajectory_csv",
    "fixed6",
    "TRAJECTORY_COLUMNS",
]

SAMPLE_RATE = 50.0  # samples per second of trajectory time
DEFECT_TOL = 1e-6
DEFAULT_ENTRIES = 8
DEFAULT_SEGMENTS = 20
MIN_SEGMENTS = 10
_COINCIDENT = 1e-6
TRAJECTORY_COLUMNS = ("time", "x", "y", "vx", "vy", "phase")


class Direction(str, enum.Enum):
    CCW = "ccw"
    CW = "cw"

    @property
    def sign(self) -> float:
        return 1.0 if self is Direction.CCW else -1.0


class Phase(str, enum.Enum):
    TRANSIT = "transit"
    LOITER = "loiter"


class TransitionSolveError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleBoundaryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped planar states; ``phases[i]`` labels the interval that starts at sample i."""

    times: np.ndarray
    states: np.ndarray  # (n, 4): x, y, vx, vy
    phases: tuple[Phase, ...]
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        t = np.asarray(self.times, float)
        s = np.asarray(self.states, float).reshape(-1, 4)
        if len(t) != len(s) or len(self.phases) != len(t):
            raise ValueError("times, states and phases must align")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(s)):
            raise ValueError("non-finite state")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "phases", tuple(Phase(p) for p in self.phases))

    @classmethod
    def empty(cls) -> "Trajectory":
        return cls(np.zeros(0), np.zeros((0, 4)), ())

    def __len__(self) -> int:
        return len(self.times)

    @property
    def total_time(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self) else 0.0

    @property
    def total_length(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.sum(np.hypot(*np.diff(self.states[:, :2], axis=0).T)))

    def start_state(self) -> PlanarState:
        x, y, vx, vy = self.states[0]
        return PlanarState(Point(x, y), (vx, vy))

    def end_state(self) -> PlanarState:
        x, y, vx, vy = self.states[-1]
        return PlanarState(Point(x, y), (vx, vy))

    def shifted(self, dt: float) -> "Trajectory":
        return Trajectory(self.times + dt, self.states, self.phases, self.info)

    def then(self, other: "Trajectory") -> "Trajectory":
        """Append ``other``, starting where this one ends; the shared join sample is kept once."""
        if not len(self):
            return other
        if not len(other):
            return self
        nxt = other.shifted(self.times[-1] - other.times[0])
        phases = self.phases[:-1] + nxt.phases
        return Trajectory(
            np.concatenate([self.times[:-1], nxt.times]),
            np.vstack([self.states[:-1], nxt.states]),
            phases,
            self.info,
        )


@dataclass(frozen=True, eq=False)
class EntryCandidate:
    index: int
    entry: Point
    direction: Direction
    time: float
    trajectory: Trajectory | None
    error: str | None = None


def _loiter_state(t: Target, angle: float, speed: float, direction: Direction) -> np.ndarray:
    c, r = t.position, t.loiter_radius
    sgn = direction.sign
    return np.array([
        c.x + r * math.cos(angle),
        c.y + r * math.sin(angle),
        -sgn * speed * math.sin(angle),
        sgn * speed * math.cos(angle),
    ])


def loiter_trajectory(
    t: Target, entry: Point, direction: Direction | str, p: QuadParams, rate: float = SAMPLE_RATE
) -> Trajectory:
    """One full circle at the loiter speed, leaving exactly where and how it entered."""
    direction = Direction(direction)
    speed = v_max(p, t.loiter_radius)
    r = t.loiter_radius
    offset = math.hypot(entry.x - t.position.x, entry.y - t.position.y)
    if abs(offset - r) > 1e-9 * max(r, 1.0) + 1e-9:
        raise ValueError(f"entry point is {offset} m from target {t.id}, expected {r}")
    a0 = math.atan2(entry.y - t.position.y, entry.x - t.position.x)
    duration = 2.0 * math.pi * r / speed
    n = max(int(math.ceil(duration * rate)), 16)
    times = np.linspace(0.0, duration, n + 1)
    angles = a0 + direction.sign * (speed / r) * times
    states = np.array([_loiter_state(t, a, speed, direction) for a in angles])
    states[-1] = states[0]
    return Trajectory(times, states, (Phase.LOITER,) * (n + 1), {"loiter_speed": speed})


def _interpolate_segment(t0: float, t1: float, s0: np.ndarray, s1: np.ndarray, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Samples strictly inside (t0, t1): velocity linear, position its integral."""
    h = t1 - t0
    n = int(math.floor(h * rate))
    if n < 1:
        return np.zeros(0), np.zeros((0, 4))
    tau = np.arange(1, n + 1) / rate
    tau = tau[tau < h - 1e-12]
    v0, v1 = s0[2:], s1[2:]
    pos = s0[:2] + np.outer(tau, v0) + np.outer(tau**2 / (2 * h), v1 - v0)
    vel = v0 + np.outer(tau / h, v1 - v0)
    return t0 + tau, np.hstack([pos, vel])


def min_time_transition(
    start: PlanarState,
    goal: PlanarState,
    p: QuadParams,
    segments: int = DEFAULT_SEGMENTS,
    *,
    speed_limit: float | None = None,
    rate: float = SAMPLE_RATE,
) -> Trajectory:
    """Fastest admissible transfer between two planar states.

    ``info`` carries the solve record: ``tf``, ``max_defect``,
    ``boundary_residual``, ``lower_bound`` and the collocation knots.
    """
    if segments < MIN_SEGMENTS:
        raise ValueError(f"need at least {MIN_SEGMENTS} segments")
    s0, sf = start.as_array(), goal.as_array()
    if np.max(np.abs(s0 - sf)) < _COINCIDENT:
        return Trajectory(np.zeros(1), s0[None, :], (Phase.TRANSIT,), {"tf": 0.0, "degenerate": True})
    v_cap = straight_speed_bound(p)
    limit = math.inf if speed_limit is None else float(speed_limit)
    for name, s in (("start", start), ("goal", goal)):
        if s.speed > min(v_cap, limit) * (1 + 1e-9):
            raise InfeasibleBoundaryError(
                f"{name} speed {s.speed:.6g} m/s exceeds the admissible {min(v_cap, limit):.6g} m/s"
            )
    prob = CollocationProblem(s0, sf, a_max(p), drag_factor(p), limit, segments)
    res = solve_min_time(prob)
    diag = {
        "tf": res.tf,
        "max_defect": res.max_defect,
        "boundary_residual": res.boundary_residual,
        "status": res.message,
        "iterations": res.iterations,
        **res.diagnostics,
    }
    if not res.success or res.max_defect > DEFECT_TOL or res.boundary_residual > DEFECT_TOL:
        raise TransitionSolveError(f"transition solve failed: {res.message}", diag)
    speed_bound = min(v_cap, limit)
    gap = dist(start.position, goal.position)
    diag["lower_bound"] = gap / speed_bound if math.isfinite(speed_bound) else 0.0
    diag["knot_times"] = res.times
    diag["knot_states"] = res.states
    diag["controls"] = res.controls

    times, states = [res.times[:1]], [res.states[:1]]
    for k in range(len(res.times) - 1):
        ti, si = _interpolate_segment(res.times[k], res.times[k + 1], res.states[k], res.states[k + 1], rate)
        times += [ti, res.times[k + 1 : k + 2]]
        states += [si, res.states[k + 1 : k + 2]]
    t = np.concatenate(times)
    return Trajectory(t, np.vstack(states), (Phase.TRANSIT,) * len(t), diag)


def _entry_angles(k: int) -> np.ndarray:
    return 2.0 * math.pi * np.arange(k) / k


def transition_candidates(
    exit_state: PlanarState,
    t: Target,
    p: QuadParams,
    k_entries: int = DEFAULT_ENTRIES,
    segments: int = DEFAULT_SEGMENTS,
) -> list[EntryCandidate]:
    """Solve every (entry point, direction) pair; candidate ``2*j + d`` is entry j with direction d."""
    if k_entries < 2:
        raise ValueError("need at least 2 entry points")
    speed = v_max(p, t.loiter_radius)
    limit = max(speed, exit_state.speed)
    out = []
    for j, angle in enumerate(_entry_angles(k_entries)):
        for d, direction in enumerate((Direction.CCW, Direction.CW)):
            g = _loiter_state(t, angle, speed, direction)
            goal = PlanarState(Point(g[0], g[1]), (g[2], g[3]))
            idx = 2 * j + d
            try:
                traj = min_time_transition(exit_state, goal, p, segments, speed_limit=limit)
            except (TransitionSolveError, InfeasibleBoundaryError) as exc:
                out.append(EntryCandidate(idx, goal.position, direction, math.inf, None, str(exc)))
                continue
            out.append(EntryCandidate(idx, goal.position, direction, traj.info["tf"], traj))
    return out


def transition_to_target(
    exit_state: PlanarState,
    t: Target,
    p: QuadParams,
    k_entries: int = DEFAULT_ENTRIES,
    segments: int = DEFAULT_SEGMENTS,
) -> tuple[Trajectory, EntryCandidate]:
    """Fastest transfer onto the loiter circle of ``t`` over sampled entries.

    Transfers are capped at the larger of the destination loiter speed and
    the departure speed.
    """
    cands = transition_candidates(exit_state, t, p, k_entries, segments)
    solved = [c for c in cands if c.trajectory is not None]
    if not solved:
        raise TransitionSolveError(
            f"all {len(cands)} transitions to target {t.id} failed",
            {"errors": [c.error for c in cands]},
        )
    best = min(solved, key=lambda c: (c.time, c.index))
    return best.trajectory, best


def tour_trajectory(
    tour: Tour | Sequence[int],
    depot: Depot,
    targets: Mapping[int, Target],
    p: QuadParams,
    k_entries: int = DEFAULT_ENTRIES,
    segments: int = DEFAULT_SEGMENTS,
) -> Trajectory:
    """Depart the depot at rest, then transit and loiter target by target."""
    seq = tour.sequence if isinstance(tour, Tour) else tuple(tour)
    if not seq:
        return Trajectory.empty()
    state = PlanarState(depot.position, (0.0, 0.0))
    traj = Trajectory.empty()
    entries = []
    for tid in seq:
        target = targets[tid]
        leg, cand = transition_to_target(state, target, p, k_entries, segments)
        loiter = loiter_trajectory(target, cand.entry, cand.direction, p)
        traj = traj.then(leg).then(loiter)
        state = loiter.end_state()
        entries.append({"target": tid, "entry": (cand.entry.x, cand.entry.y), "direction": cand.direction.value, "transit_time": cand.time})
    return Trajectory(traj.times, traj.states, traj.phases, {"entries": entries})


def holonomic_transition_time(a: Point, b: Point, speed: float) -> float:
    if not speed > 0:
        raise ValueError("speed must be > 0")
    return dist(a, b) / speed


def fixed6(v: float) -> str:
    """Six-decimal text without a sign on values that round to zero."""
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for t, (x, y, vx, vy), ph in zip(traj.times, traj.states, traj.phases):
            w.writerow([fixed6(t), fixed6(x), fixed6(y), fixed6(vx), fixed6(vy), ph.value])
