import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deckcover.actions import (ActionError, Extension, LiftedAction, ObstructedLift,
                               action_obstruction, commuting_square_residual, cotangent_covering,
                               deck_valued_delta, gamma_cochain, hyperbolic, lift_difference,
                               make_action, symplectic_residual)
from deckcover.atlas import builtin_atlas
from deckcover.covering import ChartMap, cotangent_map
from deckcover.scenario import Scenario

from conftest import standard_cover

CIRCLE = standard_cover("circle")


def test_circle_group_rotation_is_obstructed():
    act = make_action("rotation", CIRCLE.atlas, group="circle")
    d = action_obstruction(act, CIRCLE, act.model.fundamental_loops()[0])
    assert d.value == (1,)
    with pytest.raises(ObstructedLift) as err:
        LiftedAction(act, CIRCLE)
    assert err.value.element == d
    with pytest.raises(ActionError):
        make_action("nonsense", CIRCLE.atlas)


@given(st.floats(-9, 9), st.floats(-9, 9), st.floats(-20, 20))
def test_universal_rotation_lift_group_law(s, t, u):
    L = LiftedAction(make_action("rotation", CIRCLE.atlas), CIRCLE)
    g, h = L.model.element([s]), L.model.element([t])
    x = CIRCLE.from_unwrapped([u])
    a = CIRCLE.canonicalize(L.lift(g, L.lift(h, x)))
    b = CIRCLE.canonicalize(L.lift(L.model.multiply(g, h), x))
    assert a.chart == b.chart and a.label == b.label
    assert np.max(np.abs(a.y - b.y)) < 1e-9
    # independent oracle: rotation lifts to translation of the unwrapped angle
    assert math.isclose(CIRCLE.unwrap(a)[0], u + s + t, abs_tol=1e-9)
    assert L.covers(g, x) < 1e-12


@pytest.mark.parametrize("name, gamma, b", [("circle_halfturn_extension", 1, [[1]]),
                                            ("circle_reflection_extension", 0, [[-1]])])
def test_extension_data(name, gamma, b):
    L = Scenario.load(name).lifted()
    e, sigma = L.model.component_reps()
    assert L.gamma(sigma, sigma).value == (gamma,)
    assert L.gamma(e, sigma).is_identity and L.gamma(e, e).is_identity
    assert L.b(sigma).matrix() == b and L.normalised()
    dG = deck_valued_delta(gamma_cochain(L), L)
    assert all(dG(*t).is_identity for t in itertools.product([e, sigma], repeat=3))


def test_half_turn_squares_to_the_generator():
    # independent oracle: the half-turn lift is u -> u + pi on the unwrapped angle
    L = Scenario.load("circle_halfturn_extension").lifted()
    sigma = L.model.component_reps()[1]
    for u in np.linspace(-7, 7, 9):
        x = CIRCLE.from_unwrapped([u])
        assert math.isclose(CIRCLE.unwrap(L.lift(sigma, x))[0], u + math.pi, abs_tol=1e-9)


@pytest.mark.parametrize("name, labels", [("circle_halfturn_extension", {1: [1]}),
                                          ("circle_halfturn_extension", {1: [-2]}),
                                          ("circle_reflection_extension", {1: [2]}),
                                          ("circle_reflection_extension", {1: [-1]})])
def test_alternate_lift_changes_gamma_by_coboundary(name, labels):
    L = Scenario.load(name).lifted()
    L2 = LiftedAction(L.action, L.covering, labels)
    eta = lift_difference(L, L2)
    d_eta = deck_valued_delta(eta, L)
    gs = L.model.component_reps()
    for g, h in itertools.product(gs, repeat=2):
        assert L2.gamma(g, h) == L.gamma(g, h) * d_eta(g, h)


def test_extension_associative_with_inverses():
    sc = Scenario.load("circle_reflection_extension")
    ext = Extension(sc.lifted())
    G = sc.covering.group
    e, sigma = ext.model.component_reps()
    els = [ext.element(G.element(k), g) for k in (-1, 0, 2) for g in (e, sigma)]
    for u, v, w in itertools.product(els, repeat=3):
        assert ext.same(ext.compose(ext.compose(u, v), w), ext.compose(u, ext.compose(v, w)))
    for u in els:
        assert ext.same(ext.compose(u, ext.inverse(u)), ext.identity())
        # the composition law matches composition of the lifted maps
        x = CIRCLE.from_unwrapped([0.7])
        for v in els:
            lhs = ext.act(u, ext.act(v, x))
            rhs = ext.act(ext.compose(u, v), x)
            assert CIRCLE.same_point(lhs, rhs)


def test_orthogonal_semidirect_product():
    sc = Scenario.load("circle_orthogonal")
    L = sc.lifted()
    M = L.model
    sig = M.element([0.0], 1)
    g = M.element([1.5])
    assert M.multiply(sig, g).params == (-1.5,)
    x = CIRCLE.from_unwrapped([0.4])
    for a, b in itertools.product([sig, g, M.multiply(g, sig)], repeat=2):
        lhs = L.lift(a, L.lift(b, x))
        rhs = CIRCLE.deck_act(L.gamma(a, b), L.lift(M.multiply(a, b), x))
        assert CIRCLE.same_point(lhs, rhs)


def _fd_chart_map(f: ChartMap, h=1e-6) -> ChartMap:
    def jac(y):
        y = np.atleast_1d(y)
        cols = [(f(y + h * e) - f(y - h * e)) / (2 * h) for e in np.eye(len(y))]
        return np.stack(cols, axis=1)
    return ChartMap(f.fn, jac)


def test_commuting_square(rng):
    cyl = builtin_atlas("cylinder")
    ccov = cotangent_covering(CIRCLE, cyl)
    assert ccov.is_simply_connected()
    Lb = LiftedAction(hyperbolic(CIRCLE.atlas), CIRCLE)
    Lc = LiftedAction(hyperbolic(cyl), ccov)
    for x in CIRCLE.sample_points(rng, 10, 2):
        g = Lb.model.element([rng.uniform(-2, 2)])
        xi = rng.normal(size=1)
        assert commuting_square_residual(Lb, Lc, g, x, xi) < 1e-9
        # the analytic Jacobian against a finite-difference one
        f = Lb.action.chart_map(g)
        _, exact = cotangent_map(f, x.y, xi)
        _, fd = cotangent_map(_fd_chart_map(f), x.y, xi)
        assert abs(exact[0] - fd[0]) < 1e-6 * (1 + abs(exact[0]))


def test_cylinder_fields_match_flows(rng):
    cyl = builtin_atlas("cylinder")
    h = 1e-5
    for name in ("hyperbolic", "boost", "rotation", "euclid"):
        act = make_action(name, cyl)
        for i in range(act.model.dim):
            for y in rng.uniform(-2, 2, size=(5, 2)):
                e = np.eye(act.model.dim)[i] * h
                fd = (act.flow(e, y) - act.flow(-e, y)) / (2 * h)
                assert np.allclose(act.vector_field(i, y), fd, atol=1e-8)


def test_cotangent_lifts_are_symplectic(rng):
    cyl = builtin_atlas("cylinder")
    omega = lambda y: -1.0
    for name in ("hyperbolic", "boost", "rotation", "reflection"):
        act = make_action(name, cyl)
        for k in act.model.components.elements():
            g = act.model.element(rng.uniform(-1, 1, size=act.model.dim), k.value)
            for y in rng.uniform(-2, 2, size=(4, 2)):
                assert symplectic_residual(act, g, omega, y) < 1e-8
