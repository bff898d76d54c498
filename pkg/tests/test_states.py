import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deckcover.expr import Expression
from deckcover.moment import TwoForm
from deckcover.scenario import Scenario
from deckcover.states import (StatesError, build_grid, compute_state_space, hamiltonian_field,
                              hamiltonian_flow, moment_drift, poisson_residual, quotient_states,
                              richardson_order, rk4, splitting_residual, states_csv)

TAU = 2 * math.pi
CYL = ["theta", "p"]
OMEGA = TwoForm.from_expression("-1", CYL)


@pytest.fixture(scope="module")
def boost():
    return Scenario.load("cylinder_boost")


@pytest.fixture(scope="module")
def rotation():
    return Scenario.load("cylinder_rotation")


@pytest.mark.parametrize("W", [1, 2, 3])
def test_boost_level_splits_into_2w_plus_1(boost, W):
    grid = build_grid(boost.covering, W, 0.1)
    space = compute_state_space(boost.moment, grid, 0.0)
    quo = quotient_states(space)
    assert len(space.states) == 2 * W + 1
    assert [c.multiplicity for c in quo.classes] == [2 * W + 1]
    iotas = sorted(s.iota[0] for s in space.states)
    assert np.max(np.abs(np.diff(iotas) - TAU)) < 1e-8
    assert abs(iotas[W]) < 1e-12
    assert splitting_residual(space, quo) < 1e-8 and not quo.descent_violations


def test_grid_shape_and_lookup(boost):
    grid = build_grid(boost.covering, 1, 0.1)
    assert grid.n_nodes == grid.n_base * 3
    node = grid.node(1, 7)
    x = grid.cover_point(node)
    assert grid.locate(x) == node


def test_rotation_level_is_one_state(rotation):
    grid = build_grid(rotation.covering, 2, 0.1)
    space = compute_state_space(rotation.moment, grid, 0.5)
    quo = quotient_states(space)
    assert [c.multiplicity for c in quo.classes] == [1]
    assert quo.classes[0].fixed


def test_empty_level_set(rotation):
    grid = build_grid(rotation.covering, 1, 0.1)
    space = compute_state_space(rotation.moment, grid, 10.0)
    assert space.states == []
    assert quotient_states(space).classes == []


def test_plane_level_is_one_state():
    sc = Scenario.load("plane_translations")
    grid = build_grid(sc.covering, 0, 0.1)
    space = compute_state_space(sc.moment, grid, [0.0, 0.0])
    assert [c.multiplicity for c in quotient_states(space).classes] == [1]


def test_state_ids_are_deterministic(boost):
    a = compute_state_space(boost.moment, build_grid(boost.covering, 2, 0.1), 0.0)
    b = compute_state_space(boost.moment, build_grid(boost.covering, 2, 0.1), 0.0)
    assert [s.id for s in a.states] == list(range(5))
    assert states_csv(a, quotient_states(a)) == states_csv(b, quotient_states(b))


def test_csv_format(boost):
    space = compute_state_space(boost.moment, build_grid(boost.covering, 1, 0.1), 0.0)
    lines = states_csv(space, quotient_states(space)).strip().split("\n")
    assert lines[0] == "id,iota,orbit,multiplicity"
    assert len(lines) == 4
    ids, iotas = zip(*[(int(r.split(",")[0]), float(r.split(",")[1])) for r in lines[1:]])
    assert ids == (0, 1, 2)
    assert all(r.endswith(",0,3") for r in lines[1:])


def test_hamiltonian_field_of_pendulum():
    h = Expression.bind("p^2/2 - cos(theta)", CYL)
    V = hamiltonian_field(h, OMEGA)
    for y in np.random.default_rng(3).uniform(-2, 2, size=(10, 2)):
        assert np.allclose(V(y), [y[1], -math.sin(y[0])])


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_rk4_against_exact_oscillator(a, b):
    V = hamiltonian_field(Expression.bind("(theta^2 + p^2)/2", CYL), OMEGA)
    ys = rk4(V, [a, b], 2.0, 0.01)
    exact = [a * math.cos(2) + b * math.sin(2), -a * math.sin(2) + b * math.cos(2)]
    assert np.allclose(ys[-1], exact, atol=1e-9)


def test_rk4_rejects_bad_steps():
    with pytest.raises(StatesError):
        rk4(lambda y: y, [1.0], 1.0, 0.3)


def test_richardson_order_is_four():
    h = Expression.bind("p^2/2 - cos(theta)", CYL)
    assert abs(richardson_order(h, OMEGA, np.array([1.1, 0.1])) - 4) < 0.3
    assert math.isnan(richardson_order(Expression.bind("cos(theta)", CYL), OMEGA, [0.3, 0.0]))


def test_boost_moment_invariant_under_cos_flow(boost):
    cov = boost.covering
    h = Expression.bind("cos(theta)", CYL)
    traj = hamiltonian_flow(h, boost.omega, cov, cov.point(0, 0, [1.0, 0.0]), 10.0, 0.01)
    assert moment_drift(boost.moment, traj) < 1e-6
    assert abs(traj.points[-1].y[1] - 10 * math.sin(1.0)) < 1e-9


def test_rotation_flow_crosses_sheets(rotation):
    cov = rotation.covering
    h = Expression.bind("p^2/2", CYL)
    traj = hamiltonian_flow(h, rotation.omega, cov, cov.point(1, 0, [3.0, 1.3]), 10.0, 0.01)
    assert moment_drift(rotation.moment, traj) < 1e-6
    assert traj.points[-1].label.value == (2,)
    cut = hamiltonian_flow(h, rotation.omega, cov, cov.point(1, 0, [3.0, 1.3]), 10.0, 0.01, 1)
    assert cut.truncated and len(cut.points) < len(traj.points)


def test_pendulum_does_not_commute_with_boost(boost):
    grid = build_grid(boost.covering, 0, 0.3)
    h = Expression.bind("p^2/2 - cos(theta)", CYL)
    assert poisson_residual(h, boost.moment, boost.omega, grid.base_points) > 0.5
