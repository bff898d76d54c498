import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deckcover.actions import hyperbolic
from deckcover.atlas import builtin_atlas
from deckcover.cech import CechCocycle, apply_coboundary
from deckcover.covering import (ChartMap, CoverPoint, Covering, CoveringError,
                                IntermediateCovering, canonical_pullback_residual,
                                cotangent_map, star_p_symplectic_residual)
from deckcover.groups import DeckGroup, Subgroup

from conftest import standard_cover

CIRCLE = standard_cover("circle")
TORUS = standard_cover("torus")


def test_generator_loops_lift_to_deck_generators():
    assert CIRCLE.loop_deck_element(CIRCLE.atlas.generator_path(0)).value == (1,)
    vals = [TORUS.loop_deck_element(TORUS.atlas.generator_path(i)).value for i in range(2)]
    assert vals == [(1, 0), (0, 1)]
    assert CIRCLE.is_simply_connected() and TORUS.is_simply_connected()


@given(st.floats(-30, 30))
def test_unwrap_round_trip(u):
    x = CIRCLE.from_unwrapped([u])
    assert math.isclose(CIRCLE.unwrap(x)[0], u, abs_tol=1e-12)
    assert CIRCLE.atlas.charts[x.chart].contains(x.y)


@given(st.floats(-10, 10), st.integers(-4, 4))
def test_deck_action_is_free_and_fibre_preserving(u, k):
    G = CIRCLE.group
    x = CIRCLE.from_unwrapped([u])
    d = G.element(k)
    y = CIRCLE.deck_act(d, x)
    assert CIRCLE.atlas.same_point(CIRCLE.project(y).y, CIRCLE.project(x).y)
    assert CIRCLE.same_point(x, y) == (k == 0)
    assert CIRCLE.deck_between(y, x) == d
    assert math.isclose(CIRCLE.unwrap(CIRCLE.canonicalize(y))[0], u + 2 * math.pi * k, abs_tol=1e-9)


def test_lift_path_matches_unwrapped_curve():
    at = CIRCLE.atlas
    t = np.linspace(0, 1, 300)
    curve = 7.0 * np.sin(3 * t) + t
    pts = CIRCLE.lift_path(at.subdivide_path(curve[:, None], t), CIRCLE.base)
    got = np.array([CIRCLE.unwrap(x)[0] for x in pts])
    assert np.max(np.abs(got - curve)) < 1e-12


def test_finite_cover_is_not_simply_connected():
    at = builtin_atlas("circle")
    cov = Covering(at, CechCocycle.from_edges(at, DeckGroup.Zn(4), {(2, 0): 1}))
    assert not cov.is_simply_connected()
    assert cov.loop_deck_element(at.generator_path(0)).value == 1
    four = at.path_from_curve(lambda t: np.array([8 * math.pi * t]), 400, closed=True)
    assert cov.loop_deck_element(four).is_identity
    assert len(cov.fibre(at.base)) == 4


def test_cohomologous_cocycle_still_universal():
    at = builtin_atlas("circle")
    c = apply_coboundary(CechCocycle.standard(at), {0: 2, 1: -1, 2: 5})
    cov = Covering(at, c)
    assert cov.is_simply_connected()
    assert not cov.is_standard
    with pytest.raises(CoveringError):
        cov.unwrap(cov.base)


def test_rank_mismatch_is_not_universal():
    at = builtin_atlas("torus")
    vals = {k: DeckGroup.Z(1).element(v.value[0]) for k, v in CechCocycle.standard(at).values.items()}
    cov = Covering(at, CechCocycle(at, DeckGroup.Z(1), vals))
    assert not cov.is_simply_connected()


def test_intermediate_cover_charts():
    G = CIRCLE.group
    ic = IntermediateCovering(CIRCLE, Subgroup.generated_by(G, [3]))
    assert [r.value for r in ic.reps] == [(0,), (1,), (2,)]
    rng = np.random.default_rng(1)
    for x in CIRCLE.sample_points(rng, 20, 4):
        a, d0, h, y = ic.j_inverse(x)
        assert ic.H.contains(h)
        assert ic.j(a, d0, h, y) == x
    # the induced H-valued cocycle reproduces the parent glueing
    at = CIRCLE.atlas
    for ((a, d0), (b, d1)), gh in ic.induced_cocycle().items():
        if a == b:
            continue
        y = at.overlap_point(a, b)
        h = G.element(6)
        lhs = CIRCLE.to_chart(ic.j(a, d0, h, y), b)
        rhs = ic.j(b, d1, h * gh, at.transition(a, b, y))
        assert CIRCLE.same_point(lhs, rhs)
        assert ic.H.contains(gh)


def _linear(M):
    M = np.asarray(M, dtype=float)
    return ChartMap(lambda y: M @ y, lambda y: M)


@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-3, 3), st.floats(-3, 3))
def test_cotangent_composition_law(m, y1, y2, p1, p2):
    A, B = np.reshape(m[:4], (2, 2)) + 3 * np.eye(2), np.reshape(m[4:], (2, 2)) + 3 * np.eye(2)
    f, g = _linear(A), _linear(B)
    y, p = np.array([y1, y2]), np.array([p1, p2])
    ym, pm = cotangent_map(g, y, p)
    lhs = cotangent_map(f, ym, pm)
    rhs = cotangent_map(f.compose(g), y, p)
    assert np.allclose(lhs[0], rhs[0]) and np.allclose(lhs[1], rhs[1], atol=1e-9)
    # the canonical pairing p(v) is preserved
    v = np.array([0.3, -1.1])
    assert math.isclose(float(rhs[1] @ (A @ B @ v)), float(p @ v), abs_tol=1e-9)


def test_cotangent_of_nonlinear_flow_preserves_pairing():
    act = hyperbolic(builtin_atlas("circle"))
    f = act.chart_map(act.model.element([0.8]))
    y, p = np.array([1.1]), np.array([0.7])
    _, q = cotangent_map(f, y, p)
    assert math.isclose(q[0] * f.jacobian(y)[0, 0], p[0], rel_tol=1e-12)


def test_star_p_pulls_back_canonical_forms(rng):
    for x in TORUS.sample_points(rng, 20, 2):
        xi, V = rng.normal(size=2), rng.normal(size=4)
        assert canonical_pullback_residual(TORUS, x, xi, V) < 1e-10
        assert star_p_symplectic_residual(TORUS, x, xi) < 1e-8
