import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from deckcover.groups import (INFINITE, DeckGroup, GroupHom, GroupMismatchError,
                              NotAnAutomorphism, Subgroup, center, compose, element_order,
                              is_inner_automorphism, symmetric_group)


def perm_from_cycles(name: str, k: int) -> tuple:
    """Independent parser for 1-based cycle notation."""
    p = list(range(k))
    for cyc in name.strip(")").split(")"):
        if not cyc or cyc == "e":
            continue
        xs = [int(c) - 1 for c in cyc.strip("(")]
        for a, b in zip(xs, xs[1:] + xs[:1]):
            p[a] = b
    return tuple(p)


S3 = symmetric_group(3)


def test_s3_names_and_product_convention():
    a, b = S3.element("(12)"), S3.element("(13)")
    assert (a * b).to_json() == "(132)"
    assert (b * a).to_json() == "(123)"
    assert S3.order == 6
    assert not S3.is_abelian


def test_s3_table_against_permutation_oracle():
    for x, y in itertools.product(S3.elements(), repeat=2):
        p, q = perm_from_cycles(x.to_json(), 3), perm_from_cycles(y.to_json(), 3)
        after = tuple(p[q[i]] for i in range(3))
        assert perm_from_cycles((x * y).to_json(), 3) == after


def test_s3_center_trivial_and_orders():
    assert [z.to_json() for z in center(S3).elements()] == ["e"]
    orders = sorted(element_order(x) for x in S3.elements())
    assert orders == [1, 2, 2, 2, 3, 3]


def test_cyclic_and_free_groups():
    Z4 = DeckGroup.Zn(4)
    assert element_order(Z4.element(2)) == 2
    assert element_order(Z4.element(3)) == 4
    Z = DeckGroup.Z(1)
    assert element_order(Z.element(5)) == INFINITE
    assert element_order(Z.identity()) == 1
    assert (Z.element(3) ** -2).value == (-6,)
    assert len(DeckGroup.Z(2).window(1)) == 9


def test_mismatch_raises():
    with pytest.raises(GroupMismatchError):
        compose(DeckGroup.Zn(4).element(1), DeckGroup.Zn(5).element(1))


@given(st.integers(-30, 30), st.integers(-30, 30), st.integers(-60, 60))
def test_rank_one_membership_matches_gcd(a, b, d):
    Z = DeckGroup.Z(1)
    H = Subgroup.generated_by(Z, [(a,), (b,)])
    g = math.gcd(a, b)
    expected = d == 0 if g == 0 else d % g == 0
    assert H.contains(Z.element(d)) == expected


def _solve_exact(M, v):
    (a, b), (c, d) = M
    det = Fraction(a * d - b * c)
    return (Fraction(d * v[0] - b * v[1]) / det, Fraction(-c * v[0] + a * v[1]) / det)


@given(st.lists(st.integers(-6, 6), min_size=4, max_size=4),
       st.integers(-20, 20), st.integers(-20, 20))
def test_rank_two_membership_matches_exact_solve(m, x, y):
    u, v = (m[0], m[1]), (m[2], m[3])
    if u[0] * v[1] - u[1] * v[0] == 0:
        return
    G = DeckGroup.Z(2)
    H = Subgroup.generated_by(G, [u, v])
    # columns are the generators
    coeffs = _solve_exact([[u[0], v[0]], [u[1], v[1]]], (x, y))
    assert H.contains(G.element((x, y))) == all(c.denominator == 1 for c in coeffs)
    assert H.index() == abs(u[0] * v[1] - u[1] * v[0])


@given(st.integers(-40, 40), st.integers(-40, 40))
def test_coset_reps_are_canonical(x, y):
    G = DeckGroup.Z(2)
    H = Subgroup.generated_by(G, [(2, 1), (0, 3)])
    d = G.element((x, y))
    r = H.coset_rep(d)
    assert H.contains(d * r.inverse())
    assert r in H.coset_reps()
    assert len(H.coset_reps()) == H.index() == 6


def test_finite_subgroups():
    Z6 = DeckGroup.Zn(6)
    H = Subgroup.generated_by(Z6, [4])
    assert [h.value for h in H.elements()] == [0, 2, 4]
    assert H.index() == 2
    A3 = Subgroup.from_elements(S3, ["e", "(123)", "(132)"])
    assert A3.index() == 2
    assert len(A3.coset_reps()) == 2


def test_inner_automorphisms():
    a = S3.element("(12)")
    conj = GroupHom.from_function(S3, S3, lambda x: a * x * a.inverse())
    w = is_inner_automorphism(conj)
    assert w is not None
    assert all(conj(x) == w * x * w.inverse() for x in S3.elements())
    # swapping two generators of the Klein group is outer
    klein = DeckGroup.from_table([[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]])
    swap = GroupHom.from_function(klein, klein, lambda x: klein.element({0: 0, 1: 2, 2: 1, 3: 3}[x.value]))
    assert is_inner_automorphism(swap) is None
    Z = DeckGroup.Z(1)
    assert is_inner_automorphism(GroupHom(Z, Z, (Z.element(-1),))) is None
    with pytest.raises(NotAnAutomorphism):
        is_inner_automorphism(GroupHom(Z, Z, (Z.element(2),)))


def test_table_validation():
    with pytest.raises(ValueError):
        DeckGroup.from_table([[0, 1], [0, 1]])
