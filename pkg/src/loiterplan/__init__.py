"""Loiter-aware multi-quadcopter tour planning.

Targets are split among vehicles by K-means, toured with Christofides and
flown as full-circle loiters joined by minimum-time transfers.
"""

from .allocation import (
    ArrivalEvent,
    FleetState,
    assign_dynamic_iteration,
    assign_static,
    procedure1_total_cost,
    procedure2_total_cost,
    start_dynamic,
)
from .clustering import Clustering, absorb_target, kmeans, truncate_targets
from .core import Allocation, Depot, Point, Target, Tour, dist, loiter_arc_length, team_cost, tour_cost
from .dynamics import PlanarState, QuadParams, TiltSolution, force_balance_residual, transition_dynamics, v_max
from .trajectory import (
    Direction,
    Trajectory,
    holonomic_transition_time,
    loiter_trajectory,
    min_time_transition,
    tour_trajectory,
    transition_to_target,
)
from .tsp import MetricGraph, brute_force_tsp, christofides, rotate_tour_to_nearest

__version__ = "0.1.0"
