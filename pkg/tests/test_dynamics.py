import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import root

from loiterplan.dynamics import (
    AccelerationLimitError,
    InfeasibleFlightError,
    PlanarState,
    QuadParams,
    TiltSolution,
    a_max,
    force_balance_residual,
    transition_dynamics,
    v_max,
)
from loiterplan.core import Point

P = QuadParams(mass=1.5, max_thrust=25.0, drag_coeff=0.5, gravity=9.81)


def tilt_oracle(p: QuadParams, r: float, v: float) -> TiltSolution:
    """Recover roll/pitch from the vertical and tangential balances, independently of the closed form."""

    def eqs(x):
        phi, theta = x
        return [
            p.max_thrust * math.cos(phi) * math.cos(theta) - p.mass * p.gravity,
            p.max_thrust * math.sin(theta) - 0.5 * p.drag_coeff * v * v,
        ]

    phi, theta = root(eqs, [0.3, 0.05], method="hybr", tol=1e-14).x
    return TiltSolution(float(phi), float(theta), v)


def test_v_max_reference_value():
    direct = ((25.0**2 - (1.5 * 9.81) ** 2) / (1.5**2 / 9.0 + 0.25 / 4.0)) ** 0.25
    assert v_max(P, 3.0) == pytest.approx(direct, rel=1e-12)
    assert v_max(P, 3.0) == pytest.approx(6.013, abs=2e-3)


def test_v_max_zero_margin():
    p = QuadParams(mass=1.0, max_thrust=9.81, drag_coeff=0.5, gravity=9.81)
    assert v_max(p, 2.0) == 0.0


def test_v_max_rejects_underpowered():
    with pytest.raises(InfeasibleFlightError):
        QuadParams(mass=3.0, max_thrust=25.0)


def test_v_max_grows_with_radius():
    assert v_max(P, 6.0) > v_max(P, 3.0)


def test_hover_balance():
    p = QuadParams(mass=1.0, max_thrust=9.81, drag_coeff=0.5, gravity=9.81)
    assert force_balance_residual(p, 3.0, TiltSolution(0.0, 0.0, 0.0)) == pytest.approx((0, 0, 0), abs=1e-12)


def test_closed_form_satisfies_force_balance():
    v = v_max(P, 3.0)
    res = force_balance_residual(P, 3.0, tilt_oracle(P, 3.0, v))
    assert np.linalg.norm(res) < 1e-9


def test_perturbed_speed_leaves_residual():
    v = v_max(P, 3.0) + 0.1
    res = force_balance_residual(P, 3.0, tilt_oracle(P, 3.0, v))
    assert np.linalg.norm(res) > 1e-3


def test_drag_term():
    s = PlanarState(Point(0, 0), (5.0, 0.0))
    d = transition_dynamics(s, (0.0, 0.0), P)
    assert d[2] == pytest.approx(-25 * 0.5 / 3.0)
    assert d[3] == 0
    assert list(d[:2]) == [5.0, 0.0]


def test_rest_is_equilibrium():
    assert np.all(np.asarray(transition_dynamics(PlanarState(Point(1, 1), (0, 0)), (0, 0), P)) == 0)


def test_a_max_value():
    assert a_max(P) == pytest.approx(13.474, abs=1e-3)


def test_command_above_limit_rejected():
    with pytest.raises(AccelerationLimitError):
        transition_dynamics(PlanarState(Point(0, 0), (0, 0)), (a_max(P) * 1.01, 0.0), P)


params_st = st.builds(
    lambda m, margin, cd, g: QuadParams(mass=m, max_thrust=m * g * margin, drag_coeff=cd, gravity=g),
    st.floats(0.2, 5.0),
    st.floats(1.05, 4.0),
    st.floats(0.0, 2.0),
    st.floats(1.0, 20.0),
)


@given(params_st, st.floats(0.2, 50.0), st.floats(1.001, 2.0))
def test_v_max_monotonicity(p, r, f):
    v = v_max(p, r)
    assert v_max(p, r * f) >= v - 1e-12
    assert v_max(QuadParams(p.mass, p.max_thrust * f, p.drag_coeff, p.gravity), r) >= v - 1e-12
    assert v_max(QuadParams(p.mass, p.max_thrust, p.drag_coeff * f + 0.01, p.gravity), r) <= v + 1e-12
    heavier = p.mass * min(f, 0.999 * p.max_thrust / (p.mass * p.gravity))
    assert v_max(QuadParams(heavier, p.max_thrust, p.drag_coeff, p.gravity), r) <= v + 1e-12


@given(params_st, st.floats(-50, 50), st.floats(-50, 50), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_zero_command_is_dissipative_and_translation_invariant(p, vx, vy, x, y):
    d0 = transition_dynamics(PlanarState(Point(0, 0), (vx, vy)), (0, 0), p)
    d1 = transition_dynamics(PlanarState(Point(x, y), (vx, vy)), (0, 0), p)
    assert np.array_equal(d0, d1)
    # d/dt (|v|^2 / 2) = v . v'
    assert vx * d0[2] + vy * d0[3] <= 1e-12
