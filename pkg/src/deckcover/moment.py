"""Local and global moment maps for symplectic actions on a covering.

Sign convention: A~ -| omega + d<J, A> = 0, with omega = f dy1 ^ dy2 in chart
coordinates (f = -1 for dp ^ dtheta on the cylinder in coordinates (theta, p)).
Each component <J, A_i> is a multi-valued potential of -(A_i~ -| omega).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import tolerances as tol
from .actions import GElement, GroupAction, LiftedAction, coadjoint_delta
from .atlas import ManifoldPoint
from .cech import apply_coboundary
from .cochains import GroupCochain
from .covering import CoverPoint, Covering, IntermediateCovering
from .expr import Expression
from .forms import (FormError, MultiValuedPotential, OneForm, build_multivalued_potential,
                    integrate_path, loop_at, propagate_constants, propagate_k, straight_integrals)
from .groups import GroupElement, center


class MomentError(ValueError):
    pass


@dataclass(eq=False)
class TwoForm:
    """omega = f dy1 ^ dy2 with a vectorised coefficient f."""
    coeff: Callable
    text: str = ""

    @staticmethod
    def from_expression(text: str, variables: Sequence[str]) -> "TwoForm":
        e = Expression.bind(text, variables)
        return TwoForm(lambda Y: e(*[np.atleast_2d(Y)[:, i] for i in range(len(variables))]),
                       str(text))

    def __call__(self, y) -> float:
        return float(np.asarray(self.coeff(np.atleast_2d(np.asarray(y, dtype=float))))
                     .reshape(-1)[0])


def interior(V: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Coefficients of V -| (f dy1 ^ dy2) = f (V1 dy2 - V2 dy1)."""
    return np.stack([-f * V[:, 1], f * V[:, 0]], axis=-1)


def contraction_form(action: GroupAction, omega: TwoForm, i: int) -> OneForm:
    """beta_i = A_i~ -| omega."""
    def coeffs(Y):
        Y = np.atleast_2d(Y)
        f = np.broadcast_to(np.asarray(omega.coeff(Y), dtype=float), (len(Y),))
        return interior(action.vector_fields(i, Y), f)
    return OneForm(action.atlas, coeffs)


@dataclass(eq=False)
class LocalMomentMap:
    action: GroupAction
    omega: TwoForm
    covering: Covering
    potentials: list

    @property
    def dim(self) -> int:
        return len(self.potentials)

    def __call__(self, a: int, d: GroupElement, y) -> np.ndarray:
        """J_{a,d}(y) as a vector of components <J, A_i>."""
        return np.array([P(a, d, np.atleast_1d(y)) for P in self.potentials])

    def many(self, a: int, d: GroupElement, Y) -> np.ndarray:
        return np.stack([P.base_branch_many(a, Y) + P.periods(d) for P in self.potentials], -1)

    def at(self, x: CoverPoint) -> np.ndarray:
        return self(x.chart, x.label, x.y)

    def pair(self, a: int, d: GroupElement, y, A) -> float:
        return float(np.dot(self(a, d, y), np.asarray(A, dtype=float)))

    def periods(self, d: GroupElement) -> np.ndarray:
        return np.array([P.periods(d) for P in self.potentials])

    def period_vectors(self) -> list:
        return [P.periods.vector.tolist() for P in self.potentials]


def build_local_moment_map(action: GroupAction, omega: TwoForm, cov: Covering) -> LocalMomentMap:
    if action.atlas is not cov.atlas:
        raise MomentError("action and covering live on different atlases")
    if action.atlas.dim != 2:
        raise MomentError("moment maps are implemented on 2-dimensional manifolds")
    pots = []
    for i in range(action.model.dim):
        beta = contraction_form(action, omega, i)
        try:
            pots.append(build_multivalued_potential(beta.scaled(-1.0), cov))
        except FormError as err:
            raise MomentError(f"generator {i}: {err}") from None
    return LocalMomentMap(action, omega, cov, pots)


def global_moment_map(J: LocalMomentMap) -> Callable[[CoverPoint], np.ndarray]:
    """J_hat on the simply connected cover; J_hat(base) = 0."""
    return J.at


# checks

def defining_residual(J: LocalMomentMap, rng: np.random.Generator, n: int = 30,
                      h: float = 1e-5) -> float:
    """max |A~ -| omega + d<J, A>| by central differences at random chart points."""
    at = J.covering.atlas
    worst = 0.0
    for pt in at.sample_points(rng, n):
        y = pt.y
        for i, P in enumerate(J.potentials):
            beta = contraction_form(J.action, J.omega, i)(y)
            grad = np.zeros(2)
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                grad[k] = (P.base_branch(pt.chart, y + e) - P.base_branch(pt.chart, y - e)) / (2 * h)
            worst = max(worst, float(np.max(np.abs(beta + grad))))
    return worst


def sheet_residual(J: LocalMomentMap, rng: np.random.Generator, n: int = 5) -> float:
    """|<J_{a,d} - J_{a,e}, A> + loop integral of A~ -| omega| over loops with deck element d."""
    cov = J.covering
    at = cov.atlas
    k = sum(1 for p in at.periods if p is not None)
    if k == 0:
        return 0.0
    words = [[1] * k, [-1] * k, [2] + [0] * (k - 1)]
    worst = 0.0
    e = cov.group.identity()
    for pt in at.sample_points(rng, n):
        for w in words:
            loop = loop_at(cov, pt, w)
            d = cov.loop_deck_element(loop, CoverPoint(pt.chart, e, pt.coords))
            diff = J(pt.chart, d, pt.y) - J(pt.chart, e, pt.y)
            for i in range(J.dim):
                beta = contraction_form(J.action, J.omega, i)
                worst = max(worst, abs(diff[i] + integrate_path(beta, loop)))
    return worst


def glue_residual(J: LocalMomentMap, rng: np.random.Generator, n: int = 50) -> float:
    from .forms import glueing_residual
    return max(glueing_residual(P, rng, n) for P in J.potentials)


@dataclass
class Equivariance:
    alpha: np.ndarray
    spread: float


def equivariance_cocycle(J: LocalMomentMap, L: LiftedAction, g: GElement,
                         points: Sequence[CoverPoint] = ()) -> Equivariance:
    """alpha(g) = J_hat(phi_hat_g x) - Ad*(g) J_hat(x), with its spread over ``points``."""
    cov = J.covering
    Ad = L.model.coadjoint(g)
    vals = []
    for x in [cov.base, *points]:
        vals.append(J.at(L.lift(g, x)) - Ad @ J.at(x))
    vals = np.array(vals)
    return Equivariance(vals[0], float(np.max(np.abs(vals - vals[0]))))


def alpha_cochain(J: LocalMomentMap, L: LiftedAction) -> GroupCochain:
    return GroupCochain(1, lambda g: equivariance_cocycle(J, L, g).alpha)


def alpha_delta_residual(J: LocalMomentMap, L: LiftedAction, pairs: Sequence) -> float:
    d = coadjoint_delta(alpha_cochain(J, L), L.model)
    return max(float(np.max(np.abs(d(g, h)))) for g, h in pairs)


@dataclass
class LocalLaw:
    residual: float
    psi: list = field(default_factory=list)


def local_transform_residual(J: LocalMomentMap, L: LiftedAction, g: GElement,
                             points: Sequence[CoverPoint]) -> LocalLaw:
    """|J_{b, d psi_b}(Phi_g y) - Ad*(g) J_{a,d}(y) - alpha(g)| with psi_b read off the lift."""
    cov = J.covering
    alpha = equivariance_cocycle(J, L, g).alpha
    Ad = L.model.coadjoint(g)
    worst, psis = 0.0, []
    for x in points:
        img = cov.canonicalize(L.lift(g, x))
        base_img = cov.atlas.canonical(L.action.act(g, x.y))
        if img.chart != base_img.chart or np.max(np.abs(img.y - base_img.y)) > 1e-7:
            raise MomentError("lift does not cover the action")
        psi = x.label.inverse() * img.label
        psis.append(psi)
        lhs = J(img.chart, x.label * psi, base_img.y)
        worst = max(worst, float(np.max(np.abs(lhs - Ad @ J.at(x) - alpha))))
    return LocalLaw(worst, psis)


@dataclass
class MomentRegauge:
    moment: LocalMomentMap
    k: dict
    L: np.ndarray
    spread: float


def regauge_local_moment_map(J: LocalMomentMap, h: dict, k_base=None,
                             rng: np.random.Generator | None = None, n: int = 20,
                             W: int = 2) -> MomentRegauge:
    """Moment map for the cocycle g' = h^-1 g h and the constant L with
    J'_{a,d} = J_{a, d k_a} + L, measured at sample points."""
    cov = J.covering
    G = cov.group
    h = {a: G.element(v) for a, v in h.items()}
    k_base = h[0].inverse() if k_base is None else G.element(k_base)
    if not center(G).contains(h[0] * k_base):
        raise MomentError("k at the base chart must lie in h_a0^-1 Z(D)")
    new = apply_coboundary(cov.cocycle, h)
    cov2 = Covering(cov.atlas, new)
    J2 = build_local_moment_map(J.action, J.omega, cov2)
    k = propagate_k(cov.cocycle, new, k_base)
    rng = np.random.default_rng(0) if rng is None else rng
    diffs = []
    for x in cov2.sample_points(rng, n, W):
        diffs.append(J2.at(x) - J(x.chart, x.label * k[x.chart], x.y))
    diffs = np.array(diffs)
    L = diffs.mean(axis=0)
    return MomentRegauge(J2, k, L, float(np.max(np.abs(diffs - L))))


# intermediate covers

@dataclass(eq=False)
class SheetMomentMap:
    """Local moment map on an intermediate cover Z with its H-valued cocycle.

    Sheets are the sets U_{a,[d0]}; each component is built independently by
    integration and constant propagation over the sheet graph.
    """
    parent: LocalMomentMap
    cover: IntermediateCovering
    constants: list

    def __call__(self, a: int, d0: GroupElement, h: GroupElement, y) -> np.ndarray:
        d0 = self.cover.coset(d0)
        out = []
        for P, C in zip(self.parent.potentials, self.constants):
            base = float(straight_integrals(P.form, P.anchors[a], np.atleast_2d(y))[0])
            out.append(base + C[(a, d0)] + P.periods(h))
        return np.array(out)


def build_sheet_moment_map(J: LocalMomentMap, ic: IntermediateCovering) -> SheetMomentMap:
    at = J.covering.atlas
    edges = {}
    for (u, v), gh in ic.induced_cocycle().items():
        if u == v:
            continue
        a, b = u[0], v[0]
        ya = at.overlap_point(a, b)
        edges[(u, v)] = (ya, at.transition(a, b, ya), gh)
    nodes = ic.sheets()
    root = (at.base.chart, ic.coset(J.covering.group.identity()))
    consts = []
    for P in J.potentials:
        def local(node, y, P=P):
            return float(straight_integrals(P.form, P.anchors[node[0]], np.atleast_2d(y))[0])
        C, worst = propagate_constants(nodes, edges, local, P.periods, root, at.base.y)
        if worst > 1e-7:
            raise MomentError(f"sheet constants inconsistent ({worst:.3g})")
        consts.append(C)
    return SheetMomentMap(J, ic, consts)


def intermediate_relation_residual(J: LocalMomentMap, ic: IntermediateCovering,
                                   rng: np.random.Generator, n: int = 50) -> float:
    """max |J~_{a,[d0],h}(k_a([d0], y)) - J_{a, h d0}(y)| at random points."""
    S = build_sheet_moment_map(J, ic)
    H = ic.H
    G = ic.parent.group
    hs = [d for d in G.window(2 * ic.window) if H.contains(d)][:9] or [G.identity()]
    worst = 0.0
    pts = ic.parent.atlas.sample_points(rng, n)
    reps = ic.reps
    for pt in pts:
        d0 = reps[int(rng.integers(len(reps)))]
        h = hs[int(rng.integers(len(hs)))]
        lhs = S(pt.chart, d0, h, pt.y)
        rhs = J(pt.chart, h * d0, pt.y)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
