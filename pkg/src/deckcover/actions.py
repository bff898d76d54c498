"""Lie group actions on the built-in manifolds, their lifts to a covering, and the
extension of G by the deck group.

Group elements are pairs (s, kappa): s are coordinates on the identity
component (additive, taken mod 2*pi for circle groups) and kappa lies in a
finite component group. Multiplication is (s, k)(s', k') = (s + A(k) s', k k')
and the element acts as Phi_s after the component representative Phi_k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from . import tolerances as tol
from .atlas import TWO_PI, Atlas, ManifoldPoint
from .cech import holonomy
from .cochains import GroupCochain, group_delta
from .covering import ChartMap, CoverPoint, Covering, CoveringError, cotangent_map
from .groups import DeckGroup, GroupElement, GroupHom


class ActionError(ValueError):
    pass


class ObstructedLift(ActionError):
    def __init__(self, message: str, element: GroupElement):
        super().__init__(message)
        self.element = element


@dataclass(frozen=True)
class GElement:
    params: tuple
    comp: GroupElement

    def to_json(self):
        return {"params": list(self.params), "component": self.comp.to_json()}


def _z2() -> DeckGroup:
    return DeckGroup.from_table([[0, 1], [1, 0]], ["e", "sigma"])


@dataclass(eq=False)
class LieGroupModel:
    name: str
    dim: int
    kind: str = "reals"                 # "reals", "circle" or "trivial"
    components: DeckGroup = field(default_factory=DeckGroup.trivial)
    automorphism: Callable | None = None   # kappa -> (dim, dim) matrix
    coadjoint_fn: Callable | None = None   # GElement -> (dim, dim) matrix on g*

    @property
    def structure_constants(self) -> np.ndarray:
        return np.zeros((self.dim, self.dim, self.dim))

    def A(self, kappa: GroupElement) -> np.ndarray:
        if self.automorphism is None:
            return np.eye(self.dim)
        return np.asarray(self.automorphism(kappa), dtype=float).reshape(self.dim, self.dim)

    def _norm(self, s) -> tuple:
        s = np.asarray(s, dtype=float).reshape(self.dim)
        if self.kind == "circle":
            s = np.mod(s, TWO_PI)
        return tuple(float(v) for v in s)

    def element(self, params=(), comp=None) -> GElement:
        c = self.components.identity() if comp is None else self.components.element(comp)
        return GElement(self._norm(params if self.dim else np.zeros(0)), c)

    def identity(self) -> GElement:
        return self.element(np.zeros(self.dim))

    def multiply(self, g: GElement, h: GElement) -> GElement:
        s = np.array(g.params) + self.A(g.comp) @ np.array(h.params)
        return GElement(self._norm(s), g.comp * h.comp)

    def inverse(self, g: GElement) -> GElement:
        ki = g.comp.inverse()
        return GElement(self._norm(-(self.A(ki) @ np.array(g.params))), ki)

    def coadjoint(self, g: GElement) -> np.ndarray:
        if self.coadjoint_fn is None:
            return np.eye(self.dim)
        return np.asarray(self.coadjoint_fn(g), dtype=float).reshape(self.dim, self.dim)

    def fundamental_loops(self) -> list[Callable]:
        """Loops in the identity component generating its fundamental group."""
        if self.kind != "circle":
            return []
        return [lambda t, i=i: TWO_PI * t * np.eye(self.dim)[i] for i in range(self.dim)]

    def component_reps(self) -> list[GElement]:
        return [GElement(self._norm(np.zeros(self.dim)), k) for k in self.components.elements()]

    def close(self, g: GElement, h: GElement, eps: float = 1e-9) -> bool:
        if g.comp != h.comp:
            return False
        d = np.array(g.params) - np.array(h.params)
        if self.kind == "circle":
            d = (d + math.pi) % TWO_PI - math.pi
        return bool(np.all(np.abs(d) < eps))


@dataclass(eq=False)
class GroupAction:
    """Phi_(s,k)(y) = flow(s, rep_k(y)) in global coordinates."""
    name: str
    atlas: Atlas
    model: LieGroupModel
    flow: Callable                       # (s, y) -> y'
    reps: dict = field(default_factory=dict)   # component value -> ChartMap
    fields: tuple = ()                   # generators, vectorised (m, dim) -> (m, dim)
    flow_jacobian: Callable | None = None

    def rep(self, kappa: GroupElement) -> ChartMap | None:
        if kappa.is_identity:
            return None
        return self.reps[kappa.value]

    def act(self, g: GElement, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        r = self.rep(g.comp)
        if r is not None:
            y = r(y)
        return np.atleast_1d(np.asarray(self.flow(np.array(g.params), y), dtype=float))

    def act_point(self, g: GElement, pt: ManifoldPoint) -> ManifoldPoint:
        return self.atlas.canonical(self.act(g, pt.y))

    def chart_map(self, g: GElement) -> ChartMap:
        jac = None
        if self.flow_jacobian is not None:
            r = self.rep(g.comp)
            s = np.array(g.params)
            if r is None:
                jac = lambda y: self.flow_jacobian(s, y)
            elif r.jac is not None:
                jac = lambda y: self.flow_jacobian(s, r(y)) @ r.jacobian(y)
        return ChartMap(lambda y: self.act(g, y), jac)

    def vector_field(self, i: int, y, h: float = tol.FD_STEP) -> np.ndarray:
        """Infinitesimal generator of the i-th basis element at y."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return self.vector_fields(i, y[None, :], h)[0]

    def vector_fields(self, i: int, Y, h: float = tol.FD_STEP) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.fields:
            return np.asarray(self.fields[i](Y), dtype=float).reshape(Y.shape)
        e = np.zeros(self.model.dim)
        e[i] = h
        return np.array([(self.flow(e, y) - self.flow(-e, y)) / (2 * h) for y in Y])


# catalogue

def _translation_jac(atlas):
    return lambda s, y: np.eye(atlas.dim)


def _const_field(v):
    v = np.asarray(v, dtype=float)
    return lambda Y: np.broadcast_to(v, np.shape(Y)).copy()


def rotation(atlas: Atlas, group: str = "reals") -> GroupAction:
    """Rotation of the first (angular) coordinate; ``group`` is "reals" or "circle"."""
    m = LieGroupModel("R" if group == "reals" else "S1", 1, group)
    e0 = np.eye(atlas.dim)[0]
    return GroupAction(f"rotation[{group}]", atlas, m,
                       lambda s, y: y + s[0] * e0, fields=(_const_field(e0),),
                       flow_jacobian=_translation_jac(atlas))


def boost(atlas: Atlas) -> GroupAction:
    """Fibre translation p -> p + s on the cylinder."""
    if atlas.dim != 2:
        raise ActionError("boost acts on the cylinder")
    e1 = np.array([0.0, 1.0])
    return GroupAction("boost", atlas, LieGroupModel("R", 1),
                       lambda s, y: y + s[0] * e1, fields=(_const_field(e1),),
                       flow_jacobian=_translation_jac(atlas))


def cylinder_euclid(atlas: Atlas) -> GroupAction:
    """R^2 acting by rotation (first parameter) and boost (second parameter)."""
    return GroupAction("euclid", atlas, LieGroupModel("R2", 2),
                       lambda s, y: y + np.asarray(s, dtype=float),
                       fields=(_const_field([1.0, 0.0]), _const_field([0.0, 1.0])),
                       flow_jacobian=_translation_jac(atlas))


def plane_translations(atlas: Atlas) -> GroupAction:
    if atlas.name != "plane":
        raise ActionError("plane translations act on the plane")
    return GroupAction("plane_translations", atlas, LieGroupModel("R2", 2),
                       lambda s, y: y + np.asarray(s, dtype=float),
                       fields=(_const_field([1.0, 0.0]), _const_field([0.0, 1.0])),
                       flow_jacobian=_translation_jac(atlas))


def half_turn(atlas: Atlas) -> GroupAction:
    """Z_2 acting by theta -> theta + pi."""
    e0 = np.eye(atlas.dim)[0]
    m = LieGroupModel("Z2", 0, "trivial", _z2())
    rep = ChartMap(lambda y: y + math.pi * e0, lambda y: np.eye(atlas.dim))
    return GroupAction("half_turn", atlas, m, lambda s, y: y, {1: rep})


def _reflection_map(atlas: Atlas) -> ChartMap:
    # on the cylinder the reflection is extended to covectors: (theta, p) -> (-theta, -p)
    return ChartMap(lambda y: -y, lambda y: -np.eye(atlas.dim))


def reflection(atlas: Atlas) -> GroupAction:
    """Z_2 acting by theta -> -theta."""
    m = LieGroupModel("Z2", 0, "trivial", _z2())
    return GroupAction("reflection", atlas, m, lambda s, y: y, {1: _reflection_map(atlas)})


def orthogonal(atlas: Atlas) -> GroupAction:
    """R x| Z_2: rotations with the reflection theta -> -theta, a(sigma) s = -s."""
    z2 = _z2()
    m = LieGroupModel("R x| Z2", 1, "reals", z2,
                      automorphism=lambda k: [[-1.0 if k.value == 1 else 1.0]],
                      coadjoint_fn=lambda g: [[-1.0 if g.comp.value == 1 else 1.0]])
    e0 = np.eye(atlas.dim)[0]
    return GroupAction("orthogonal", atlas, m, lambda s, y: y + s[0] * e0,
                       {1: _reflection_map(atlas)}, fields=(_const_field(e0),),
                       flow_jacobian=_translation_jac(atlas))


def _hyper_theta(s: float, th):
    th = np.asarray(th, dtype=float)
    k = np.round(th / TWO_PI)
    t0 = th - TWO_PI * k
    return 2.0 * np.arctan2(math.exp(s) * np.sin(t0 / 2), np.cos(t0 / 2)) + TWO_PI * k


def _hyper_dtheta(s: float, th):
    return math.exp(s) / (np.cos(th / 2) ** 2 + math.exp(2 * s) * np.sin(th / 2) ** 2)


def hyperbolic(atlas: Atlas) -> GroupAction:
    """R acting on the circle by the flow of sin(theta); on the cylinder by its cotangent lift."""
    m = LieGroupModel("R", 1)
    if atlas.dim == 1:
        return GroupAction("hyperbolic", atlas, m,
                           lambda s, y: np.atleast_1d(_hyper_theta(s[0], y[0])),
                           fields=(lambda Y: np.sin(Y[:, :1]),),
                           flow_jacobian=lambda s, y: np.array([[_hyper_dtheta(s[0], y[0])]]))

    def flow(s, y):
        return np.array([_hyper_theta(s[0], y[0]), y[1] / _hyper_dtheta(s[0], y[0])])
    return GroupAction("hyperbolic", atlas, m, flow,
                       fields=(lambda Y: np.stack([np.sin(Y[:, 0]), -Y[:, 1] * np.cos(Y[:, 0])], -1),))


CATALOGUE = {
    "rotation": rotation,
    "boost": boost,
    "euclid": cylinder_euclid,
    "plane_translations": plane_translations,
    "half_turn": half_turn,
    "reflection": reflection,
    "orthogonal": orthogonal,
    "hyperbolic": hyperbolic,
}


def make_action(name: str, atlas: Atlas, **kw) -> GroupAction:
    if name not in CATALOGUE:
        raise ActionError(f"unknown action {name!r}")
    return CATALOGUE[name](atlas, **kw)


# lifting

def _orbit_path(action: GroupAction, path_params: Callable, y, closed=None, minimum=tol.SAMPLES):
    at = action.atlas
    coarse = np.array([action.flow(path_params(t), y) for t in np.linspace(0, 1, 17)])
    length = float(np.sum(np.max(np.abs(np.diff(coarse, axis=0)), axis=1)))
    n = max(minimum, int(math.ceil(length / at.max_step())) + 1)
    t = np.linspace(0.0, 1.0, n)
    pts = np.array([np.atleast_1d(action.flow(path_params(x), y)) for x in t])
    return at.subdivide_path(pts, t, closed)


def action_obstruction(action: GroupAction, cov: Covering, loop: Callable,
                       y: ManifoldPoint | None = None) -> GroupElement:
    """Deck element of the orbit loop t -> Phi(loop(t), y); identity means no obstruction."""
    y = cov.atlas.base if y is None else y
    path = _orbit_path(action, loop, y.y, closed=True)
    return cov.loop_deck_element(path, CoverPoint(y.chart, cov.group.identity(), y.coords))


@dataclass(eq=False)
class LiftedAction:
    """Lift of an action to a covering.

    The identity component is lifted by lifting orbit paths. A component
    representative is lifted by choosing the deck label of the image of the
    base point; ``rep_labels`` holds that choice (default: identity).
    """
    action: GroupAction
    covering: Covering
    rep_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self._memo = {}
        cov = self.covering
        for loop in self.action.model.fundamental_loops():
            d = action_obstruction(self.action, cov, loop)
            if not d.is_identity:
                raise ObstructedLift(f"orbit loop has deck element {d}; use the universal "
                                     f"covering group of the identity component", d)
        G = cov.group
        self.rep_labels = {k: G.element(v) for k, v in self.rep_labels.items()}
        if self.action.model.components.order > 1:
            if G.kind != "Z" and G.order != 1:
                raise ActionError("component lifts need a free abelian deck group")
            cov.simply_connected_witness()

    @property
    def model(self) -> LieGroupModel:
        return self.action.model

    def lift_flow(self, s, x: CoverPoint) -> CoverPoint:
        s = np.asarray(s, dtype=float)
        if self.model.dim == 0 or not np.any(s):
            return x
        path = _orbit_path(self.action, lambda t: t * s, x.y)
        return self.covering.canonicalize(self.covering.lift_endpoint(path, x))

    @cached_property
    def _rep_data(self) -> dict:
        cov, at = self.covering, self.covering.atlas
        out = {}
        for k in self.model.components.elements():
            if k.is_identity:
                continue
            f = self.action.rep(k)
            hol = []
            for i in range(at.n_generators):
                t = np.linspace(0.0, 1.0, 4 * tol.SAMPLES)
                samples = np.array([f(at.generator_curves[i](x)) for x in t])
                loop = at.subdivide_path(samples, t, closed=True)
                hol.append(holonomy(cov.cocycle, loop))
            base_img = at.canonical(f(at.base.y))
            label = self.rep_labels.get(k.value, cov.group.identity())
            out[k.value] = (f, hol, CoverPoint(base_img.chart, label, base_img.coords))
        return out

    def b_rep(self, kappa: GroupElement, d: GroupElement) -> GroupElement:
        """Conjugation of d by the lifted representative of kappa."""
        if kappa.is_identity:
            return d
        _, hol, _ = self._rep_data[kappa.value]
        G = self.covering.group
        out = G.identity()
        if G.kind == "Z":
            for n, h in zip(d.value, hol):
                out = out * h ** n
        return out

    def lift_component(self, kappa: GroupElement, x: CoverPoint) -> CoverPoint:
        if kappa.is_identity:
            return x
        cov, at = self.covering, self.covering.atlas
        f, hol, fxb = self._rep_data[kappa.value]
        yb, y = at.base.y, x.y
        n = at.segment_samples(yb, y)
        t = np.linspace(0.0, 1.0, n)
        beta = yb[None, :] + t[:, None] * (y - yb)[None, :]
        e0 = cov.lift_endpoint(at.subdivide_path(beta, t, False), cov.base)
        delta = cov.deck_between(x, e0)
        fbeta = np.array([f(v) for v in beta])
        e1 = cov.lift_endpoint(at.subdivide_path(fbeta, t, False), fxb)
        return cov.canonicalize(cov.deck_act(self.b_rep(kappa, delta), e1))

    def lift(self, g: GElement, x: CoverPoint) -> CoverPoint:
        """phi_hat_g(x) = (lifted flow of s) after (lifted representative of kappa)."""
        x = self.lift_component(g.comp, x)
        return self.lift_flow(np.array(g.params), x)

    def gamma(self, g: GElement, h: GElement, points: Sequence[CoverPoint] = ()) -> GroupElement:
        """Gamma(g, h) = phi_hat_g phi_hat_h phi_hat_gh^-1, checked constant on ``points``."""
        key = ("gamma", g, h)
        if not points and key in self._memo:
            return self._memo[key]
        cov = self.covering
        vals = []
        for x in [cov.base, *points]:
            x1 = self.lift(g, self.lift(h, x))
            x2 = self.lift(self.model.multiply(g, h), x)
            vals.append(cov.deck_between(x1, x2))
        if any(v != vals[0] for v in vals):
            raise ActionError("Gamma is not constant over the sample points")
        self._memo[key] = vals[0]
        return vals[0]

    def b(self, g: GElement) -> GroupHom:
        """b(g): gamma -> phi_hat_g gamma phi_hat_g^-1 as an automorphism of D."""
        if ("b", g) in self._memo:
            return self._memo[("b", g)]
        cov = self.covering
        G = cov.group
        x = cov.base
        fx = self.lift(g, x)
        imgs = tuple(cov.deck_between(self.lift(g, cov.deck_act(d, x)), fx)
                     for d in G.generators())
        self._memo[("b", g)] = GroupHom(G, G, imgs)
        return self._memo[("b", g)]

    def covers(self, g: GElement, x: CoverPoint) -> float:
        """|p(phi_hat_g x) - Phi_g(p x)| in canonical chart coordinates."""
        at = self.covering.atlas
        lhs = self.covering.project(self.lift(g, x))
        rhs = at.canonical(self.action.act(g, x.y))
        if lhs.chart != rhs.chart:
            return math.inf
        return float(np.max(np.abs(lhs.y - rhs.y)))

    def normalised(self) -> bool:
        """phi_hat_e is the identity."""
        cov = self.covering
        x = cov.base
        return cov.same_point(self.lift(self.model.identity(), x), x)


# the extension of G by D

@dataclass(frozen=True)
class ExtElement:
    deck: GroupElement
    g: GElement

    def to_json(self):
        return {"deck": self.deck.to_json(), "g": self.g.to_json()}


@dataclass(eq=False)
class Extension:
    lifted: LiftedAction

    @property
    def model(self):
        return self.lifted.model

    def element(self, deck, g: GElement) -> ExtElement:
        return ExtElement(self.lifted.covering.group.element(deck), g)

    def identity(self) -> ExtElement:
        return ExtElement(self.lifted.covering.group.identity(), self.model.identity())

    def compose(self, u: ExtElement, v: ExtElement) -> ExtElement:
        """(gamma, g)(gamma', g') = (gamma b(g)gamma' Gamma(g, g'), g g')."""
        L = self.lifted
        bg = L.b(u.g)
        return ExtElement(u.deck * bg(v.deck) * L.gamma(u.g, v.g), self.model.multiply(u.g, v.g))

    def inverse(self, u: ExtElement) -> ExtElement:
        """(gamma, g)^-1 = (b(g)^-1 [gamma^-1 Gamma(g, g^-1)^-1], g^-1)."""
        L = self.lifted
        gi = self.model.inverse(u.g)
        inner = u.deck.inverse() * L.gamma(u.g, gi).inverse()
        return ExtElement(_invert_hom(L.b(u.g))(inner), gi)

    def act(self, u: ExtElement, x: CoverPoint) -> CoverPoint:
        """Phi_hat_(gamma, g) = gamma after phi_hat_g."""
        cov = self.lifted.covering
        return cov.deck_act(u.deck, self.lifted.lift(u.g, x))

    def same(self, u: ExtElement, v: ExtElement) -> bool:
        return u.deck == v.deck and self.model.close(u.g, v.g)

    def table(self, elements: Sequence[ExtElement]) -> list[list[ExtElement]]:
        return [[self.compose(u, v) for v in elements] for u in elements]


def _invert_hom(f: GroupHom) -> GroupHom:
    G = f.domain
    if G.kind == "Z":
        M = np.array(f.matrix(), dtype=float)
        Mi = np.rint(np.linalg.inv(M)).astype(int)
        return GroupHom(G, G, tuple(G.element(tuple(int(v) for v in Mi[:, j]))
                                    for j in range(G.rank)))
    inv = {f(x): x for x in G.elements()}
    return GroupHom.from_function(G, G, lambda g: inv[g])


# cochains on G

def lift_difference(L1: LiftedAction, L2: LiftedAction) -> GroupCochain:
    """eta(g) with phi_hat'_g = eta(g) phi_hat_g."""
    cov = L1.covering
    return GroupCochain(1, lambda g: cov.deck_between(L2.lift(g, cov.base), L1.lift(g, cov.base)))


def deck_valued_delta(alpha: GroupCochain, L: LiftedAction) -> GroupCochain:
    """Coboundary of a D-valued cochain on G with G acting through b."""
    return group_delta(alpha, lambda g, v: L.b(g)(v), L.model.multiply, side="left",
                       add=lambda a, b: a * b, neg=lambda a: a.inverse())


def coadjoint_delta(alpha: GroupCochain, model: LieGroupModel) -> GroupCochain:
    """Coboundary of a g*-valued cochain with G acting by Ad*."""
    return group_delta(alpha, lambda g, v: model.coadjoint(g) @ np.asarray(v, dtype=float),
                       model.multiply, side="left")


def gamma_cochain(L: LiftedAction) -> GroupCochain:
    return GroupCochain(2, lambda g, h: L.gamma(g, h))


def group_cohomology_delta(alpha: GroupCochain, flavour: str, context) -> GroupCochain:
    """Dispatch: "deck" (D on G via b), "coadjoint" (g* on G) or "form" (functions on D)."""
    if flavour == "deck":
        return deck_valued_delta(alpha, context)
    if flavour == "coadjoint":
        return coadjoint_delta(alpha, context)
    if flavour == "form":
        from .forms import deck_form_delta
        return deck_form_delta(alpha, context)
    raise ActionError(f"unknown cochain flavour {flavour!r}")


def symplectic_residual(action: GroupAction, g: GElement, omega: Callable, y,
                        h: float = 1e-5) -> float:
    """|omega(Phi y) det DPhi - omega(y)| for a 2-dimensional action; omega = f dy1^dy2."""
    J = ChartMap(lambda z: action.act(g, z)).jacobian(y, h)
    z = action.act(g, y)
    return abs(omega(z) * np.linalg.det(J) - omega(np.asarray(y, dtype=float)))


# cotangent extensions of lifted actions

def cotangent_covering(cov: Covering, cot_atlas: Atlas) -> Covering:
    """T*X -> T*Y for a covering X -> Y of the circle: the cocycle is pulled back along tau."""
    from .cech import CechCocycle
    if cot_atlas.dim != 2 * cov.atlas.dim or len(cot_atlas.charts) != len(cov.atlas.charts):
        raise ActionError("cotangent atlas does not match the base atlas")
    vals = {(a, b): cov.cocycle.g(a, b) for (a, b) in cov.atlas.overlaps}
    return Covering(cot_atlas, CechCocycle(cot_atlas, cov.group, vals))


def commuting_square_residual(base_lift: LiftedAction, cot_lift: LiftedAction, g: GElement,
                              x: CoverPoint, covector) -> float:
    """Extend-then-lift against lift-then-extend at (x, covector) in T*X.

    Route one applies phi_hat_g on X and moves the covector by D phi^-T.
    Route two lifts the cotangent-extended action on the cotangent covering.
    """
    dim = base_lift.covering.atlas.dim
    ccov = cot_lift.covering
    covector = np.atleast_1d(np.asarray(covector, dtype=float))
    y1 = base_lift.lift(g, x)
    _, xi1 = cotangent_map(base_lift.action.chart_map(g), x.y, covector)
    z = ccov.point(x.chart, x.label, np.concatenate([x.y, covector]))
    z1 = ccov.canonicalize(cot_lift.lift(g, z))
    if z1.chart != y1.chart or z1.label != y1.label:
        return math.inf
    return float(max(np.max(np.abs(z1.y[:dim] - y1.y)), np.max(np.abs(z1.y[dim:] - xi1))))
