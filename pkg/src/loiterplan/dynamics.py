"""Quadcopter physical model.

Loiter speed on a circle comes from balancing thrust against gravity,
centripetal demand and quadratic drag. Transitions between circles use a
planar point mass whose acceleration is bounded by the thrust left over
after hovering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Point

__all__ = [
    "QuadParams",
    "TiltSolution",
    "PlanarState",
    "InfeasibleFlightError",
    "AccelerationLimitError",
    "DEFAULT_PARAMS",
    "v_max",
    "a_max",
    "drag_factor",
    "straight_speed_bound",
    "force_balance_residual",
    "transition_dynamics",
]


class InfeasibleFlightError(ValueError):
    """Thrust cannot sustain the requested flight condition."""


class AccelerationLimitError(ValueError):
    """A commanded acceleration exceeds the thrust margin."""


@dataclass(frozen=True)
class QuadParams:
    mass: float = 1.5
    max_thrust: float = 25.0
    drag_coeff: float = 0.5
    gravity: float = 9.81

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise ValueError("mass must be > 0")
        if not self.gravity > 0:
            raise ValueError("gravity must be > 0")
        if self.drag_coeff < 0:
            raise ValueError("drag_coeff must be >= 0")
        if self.max_thrust < self.mass * self.gravity:
            raise InfeasibleFlightError(
                f"max_thrust {self.max_thrust} N cannot hover {self.mass} kg"
            )

    @property
    def weight(self) -> float:
        return self.mass * self.gravity


DEFAULT_PARAMS = QuadParams()


@dataclass(frozen=True)
class TiltSolution:
    roll: float
    pitch: float
    speed: float


@dataclass(frozen=True)
class PlanarState:
    position: Point
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        vx, vy = self.velocity
        if not (math.isfinite(vx) and math.isfinite(vy)):
            raise ValueError("non-finite velocity")
        object.__setattr__(self, "velocity", (float(vx), float(vy)))

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    def as_array(self) -> np.ndarray:
        return np.array([self.position.x, self.position.y, *self.velocity])


def v_max(p: QuadParams, r: float) -> float:
    """Highest constant speed sustainable on a circle of radius ``r``."""
    if not r > 0:
        raise ValueError("loiter radius must be > 0")
    margin = p.max_thrust**2 - p.weight**2
    if margin < 0:
        raise InfeasibleFlightError("thrust below weight")
    return (margin / (p.mass**2 / r**2 + p.drag_coeff**2 / 4.0)) ** 0.25


def a_max(p: QuadParams) -> float:
    """Horizontal acceleration available after supporting the weight."""
    return math.sqrt((p.max_thrust / p.mass) ** 2 - p.gravity**2)


def drag_factor(p: QuadParams) -> float:
    """Coefficient k in the drag acceleration -k |v| v."""
    return p.drag_coeff / (2.0 * p.mass)


def straight_speed_bound(p: QuadParams) -> float:
    """Top speed in straight level flight, where tilt thrust only fights drag.

    Infinite without drag.
    """
    if p.drag_coeff == 0:
        return math.inf
    return ((p.max_thrust**2 - p.weight**2) / (p.drag_coeff**2 / 4.0)) ** 0.25


def force_balance_residual(p: QuadParams, r: float, sol: TiltSolution) -> tuple[float, float, float]:
    """Vertical, radial and tangential force imbalance at full thrust."""
    T, m, g = p.max_thrust, p.mass, p.gravity
    phi, theta, v = sol.roll, sol.pitch, sol.speed
    return (
        T * math.cos(phi) * math.cos(theta) - m * g,
        T * math.cos(theta) * math.sin(phi) - m * v**2 / r,
        T * math.sin(theta) - 0.5 * p.drag_coeff * v**2,
    )


def transition_dynamics(
    s: PlanarState,
    accel_cmd: tuple[float, float],
    p: QuadParams,
) -> tuple[float, float, float, float]:
    """Time derivative ``(x', y', vx', vy')`` under a horizontal acceleration command."""
    ax, ay = accel_cmd
    limit = a_max(p)
    if math.hypot(ax, ay) > limit * (1 + 1e-12):
        raise AccelerationLimitError(f"|a| = {math.hypot(ax, ay):.6g} exceeds {limit:.6g}")
    vx, vy = s.velocity
    k = drag_factor(p) * math.hypot(vx, vy)
    return (vx, vy, ax - k * vx, ay - k * vy)
