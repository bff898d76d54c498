"""Closed one-forms, path integrals, the period homomorphism and multi-valued potentials.

A potential for a closed form alpha on a covering is stored as one base
branch f_{a,e} per chart plus the period map c; the branch over sheet d is
f_{a,d} = f_{a,e} + c(d).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from . import tolerances as tol
from .atlas import Atlas, ChartPath, ManifoldPoint
from .cech import CechCocycle, apply_coboundary, holonomy
from .cochains import GroupCochain, group_delta
from .covering import CoverPoint, Covering, CoveringError
from .expr import Expression
from .groups import DeckGroup, GroupElement, center


class FormError(ValueError):
    pass


class NotClosedError(FormError):
    pass


class PeriodError(FormError):
    """Generator periods are incompatible with the deck group."""


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(eq=False)
class OneForm:
    """alpha = sum_i alpha_i dy^i with vectorised coefficients (m, dim) -> (m, dim).

    The same coefficient functions serve every chart; they must be invariant
    under the period shifts of the transition maps.
    """
    atlas: Atlas
    coeffs: Callable
    texts: tuple = ()

    @staticmethod
    def from_expressions(atlas: Atlas, exprs: Sequence[str]) -> "OneForm":
        if len(exprs) != atlas.dim:
            raise FormError(f"need {atlas.dim} coefficients, got {len(exprs)}")
        es = [Expression.bind(e, atlas.coord_names) for e in exprs]

        def coeffs(Y):
            Y = np.atleast_2d(Y)
            cols = [Y[:, i] for i in range(atlas.dim)]
            return np.stack([e(*cols) for e in es], axis=-1)
        return OneForm(atlas, coeffs, tuple(str(e) for e in exprs))

    def __call__(self, y) -> np.ndarray:
        return self.coeffs(np.atleast_2d(np.asarray(y, dtype=float)))[0]

    def scaled(self, s: float) -> "OneForm":
        return OneForm(self.atlas, lambda Y: s * self.coeffs(Y))

    def overlap_residual(self, rng: np.random.Generator, n: int = 50) -> float:
        """max |alpha_a(y) - alpha_b(T_ab y)| over sampled overlap points."""
        worst = 0.0
        pairs = sorted(self.atlas.overlaps)
        for _ in range(n):
            a, b = pairs[int(rng.integers(len(pairs)))]
            y = self.atlas.overlap_point(a, b)
            z = self.atlas.transition(a, b, y)
            worst = max(worst, float(np.max(np.abs(self(y) - self(z)))))
        return worst

    def closedness_residual(self, points: int = 9, h: float = 1e-4) -> float:
        """Finite-difference |d alpha| on a grid in every chart (0 in dimension 1)."""
        if self.atlas.dim == 1:
            return 0.0
        if self.atlas.dim != 2:
            raise FormError("closedness test implemented for dimension <= 2")
        worst = 0.0
        for ch in self.atlas.charts:
            c = ch.center
            axes = []
            for i, (lo, hi) in enumerate(zip(ch.lower, ch.upper)):
                lo2 = c[i] - 3.0 if np.isinf(lo) else lo
                hi2 = c[i] + 3.0 if np.isinf(hi) else hi
                m = 0.05 * (hi2 - lo2)
                axes.append(np.linspace(lo2 + m, hi2 - m, points))
            Y = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 2)
            e0, e1 = np.array([h, 0.0]), np.array([0.0, h])
            d0a1 = (self.coeffs(Y + e0)[:, 1] - self.coeffs(Y - e0)[:, 1]) / (2 * h)
            d1a0 = (self.coeffs(Y + e1)[:, 0] - self.coeffs(Y - e1)[:, 0]) / (2 * h)
            worst = max(worst, float(np.max(np.abs(d0a1 - d1a0))))
        return worst

    def require_closed(self, eps: float = tol.FINITE_DIFF):
        r = self.closedness_residual()
        if r > eps:
            raise NotClosedError(f"form is not closed (|d alpha| ~ {r:.3g})")


def integrate_polyline(alpha: OneForm, P: np.ndarray, order: int = tol.GL_ORDER) -> float:
    """Integral of alpha along the polyline through the rows of P (one chart)."""
    P = np.asarray(P, dtype=float)
    if len(P) < 2:
        return 0.0
    u, w = gauss_legendre(order)
    A, B = P[:-1], P[1:]
    D = B - A
    pts = A[:, None, :] + u[None, :, None] * D[:, None, :]
    vals = alpha.coeffs(pts.reshape(-1, P.shape[1])).reshape(pts.shape)
    return float(np.sum(w[None, :] * np.einsum("ekd,ed->ek", vals, D)))


def integrate_path(alpha: OneForm, path: ChartPath, order: int = tol.GL_ORDER) -> float:
    """Composite Gauss-Legendre quadrature over every edge of every segment."""
    return sum(integrate_polyline(alpha, s.coords, order) for s in path.segments)


def straight_integral(alpha: OneForm, y0, y1, pieces: int = 8, order: int = tol.GL_ORDER) -> float:
    y0, y1 = np.asarray(y0, dtype=float), np.asarray(y1, dtype=float)
    P = y0[None, :] + np.linspace(0.0, 1.0, pieces + 1)[:, None] * (y1 - y0)[None, :]
    return integrate_polyline(alpha, P, order)


def straight_integrals(alpha: OneForm, y0, Y, pieces: int = 8,
                       order: int = tol.GL_ORDER) -> np.ndarray:
    """Integrals along the straight segments from y0 to each row of Y."""
    y0 = np.asarray(y0, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    u, w = gauss_legendre(order)
    knots = np.linspace(0.0, 1.0, pieces + 1)
    s = (knots[:-1, None] + u[None, :] * (knots[1] - knots[0])).ravel()
    ws = np.tile(w, pieces) * (knots[1] - knots[0])
    D = Y - y0[None, :]
    pts = y0[None, None, :] + s[None, :, None] * D[:, None, :]
    vals = alpha.coeffs(pts.reshape(-1, Y.shape[1])).reshape(pts.shape)
    return np.einsum("k,mkd,md->m", ws, vals, D)


@dataclass(eq=False)
class PeriodMap:
    """Homomorphism c: D -> R; Z^k maps through a real vector, finite groups map to 0."""
    group: DeckGroup
    vector: np.ndarray
    generator_periods: tuple = ()

    def __call__(self, d: GroupElement) -> float:
        self.group._own(d)
        if self.group.kind != "Z":
            return 0.0
        return float(np.dot(self.vector, np.asarray(d.value, dtype=float)))

    def to_json(self):
        return {"vector": [float(v) for v in self.vector],
                "generator_periods": [float(v) for v in self.generator_periods]}


def period_homomorphism(alpha: OneForm, cov: Covering, samples: int = tol.SAMPLES,
                        eps: float = 1e-7) -> PeriodMap:
    """c(gamma) = integral of alpha over a loop with deck element gamma.

    The generator loops are integrated and the values pushed through the
    holonomy. Finite deck groups force c = 0; nonzero periods on loops whose
    holonomy has finite order raise PeriodError.
    """
    alpha.require_closed()
    at = cov.atlas
    raw = [integrate_path(alpha, at.generator_path(i, samples)) for i in range(at.n_generators)]
    G = cov.group
    hol = [holonomy(cov.cocycle, at.generator_path(i, samples)) for i in range(at.n_generators)]
    if G.kind != "Z":
        bad = [p for p in raw if abs(p) > eps]
        if bad:
            raise PeriodError(f"period {bad[0]:.6g} on a loop of finite-order holonomy")
        return PeriodMap(G, np.zeros(0), tuple(raw))
    if not raw:
        return PeriodMap(G, np.zeros(G.rank), ())
    R = np.array([h.value for h in hol], dtype=float)
    vec, *_ = np.linalg.lstsq(R, np.array(raw), rcond=None)
    if np.max(np.abs(R @ vec - np.array(raw))) > eps:
        raise PeriodError("generator periods are not a homomorphism of the deck group")
    if np.linalg.matrix_rank(R) < G.rank:
        raise PeriodError("holonomy does not reach every deck generator")
    return PeriodMap(G, vec, tuple(raw))


# potentials

def propagate_constants(nodes: Sequence, edges: Mapping, local: Callable, c: Callable,
                        root, root_y) -> tuple[dict, float]:
    """Chart constants C with local_a + C_a = local_b + C_b + c(g_ab) on every edge.

    ``edges`` maps (u, v) -> (y_u, y_v, g_uv), an overlap point in both charts
    and the cocycle value. Constants are fixed along a BFS tree from ``root``
    with local_root(root_y) + C_root = 0. Returns the constants and the worst
    mismatch over all edges.
    """
    nbrs = {u: [] for u in nodes}
    for (u, v) in edges:
        nbrs[u].append(v)
    C = {root: -local(root, root_y)}
    q = deque([root])
    while q:
        u = q.popleft()
        for v in sorted(nbrs[u], key=repr):
            if v in C:
                continue
            yu, yv, g = edges[(u, v)]
            C[v] = C[u] + local(u, yu) - local(v, yv) - c(g)
            q.append(v)
    if len(C) != len(nodes):
        raise FormError("chart graph is disconnected")
    worst = 0.0
    for (u, v), (yu, yv, g) in edges.items():
        r = local(u, yu) + C[u] - local(v, yv) - C[v] - c(g)
        worst = max(worst, abs(r))
    return C, worst


@dataclass(eq=False)
class MultiValuedPotential:
    form: OneForm
    covering: Covering
    periods: PeriodMap
    constants: dict
    anchors: dict
    consistency: float = 0.0

    def base_branch(self, a: int, y) -> float:
        """f_{a,e}(y)."""
        return straight_integral(self.form, self.anchors[a], y) + self.constants[a]

    def base_branch_many(self, a: int, Y) -> np.ndarray:
        return straight_integrals(self.form, self.anchors[a], Y) + self.constants[a]

    def __call__(self, a: int, d: GroupElement, y) -> float:
        """f_{a,d}(y) = f_{a,e}(y) + c(d)."""
        return self.base_branch(a, y) + self.periods(d)

    def at(self, x: CoverPoint) -> float:
        return self(x.chart, x.label, x.y)


def _local_anchor_fn(alpha: OneForm, anchors: dict):
    return lambda a, y: straight_integral(alpha, anchors[a], y)


def build_multivalued_potential(alpha: OneForm, cov: Covering,
                                samples: int = tol.SAMPLES) -> MultiValuedPotential:
    """Multi-valued potential of a closed form on a simply connected covering.

    Base branches integrate alpha from each chart centre; chart constants are
    propagated from the base chart so that glueing holds, and the base branch
    vanishes at the base point.
    """
    alpha.require_closed()
    cov.simply_connected_witness()
    c = period_homomorphism(alpha, cov, samples)
    at = cov.atlas
    anchors = {a: at.charts[a].center for a in range(len(at.charts))}
    edges = {}
    for (a, b) in at.overlaps:
        ya = at.overlap_point(a, b)
        edges[(a, b)] = (ya, at.transition(a, b, ya), cov.cocycle.g(a, b))
    C, worst = propagate_constants(list(range(len(at.charts))), edges,
                                   _local_anchor_fn(alpha, anchors), c, at.base.chart, at.base.y)
    if worst > 1e-7:
        raise FormError(f"chart constants inconsistent around a cycle ({worst:.3g})")
    return MultiValuedPotential(alpha, cov, c, C, anchors, worst)


def eval_branch(P: MultiValuedPotential, a: int, d, y) -> float:
    return P(a, P.covering.group.element(d), np.atleast_1d(np.asarray(y, dtype=float)))


# verification helpers

def loop_at(cov: Covering, y: ManifoldPoint, word: Sequence[int], wiggle: float = 0.3,
            samples: int = tol.SAMPLES) -> ChartPath:
    """A loop at y winding word[i] times along periodic axis i, with a bump in the
    non-periodic directions (or in the second periodic axis on the torus)."""
    at = cov.atlas
    axes = [i for i, P in enumerate(at.periods) if P is not None]
    shift = np.zeros(at.dim)
    for k, i in enumerate(axes):
        shift[i] = at.periods[i] * word[k]
    bump = np.zeros(at.dim)
    others = [i for i in range(at.dim) if i not in axes]
    if others:
        ch = at.charts[y.chart]
        i = others[0]
        room = min(y.coords[i] - ch.lower[i], ch.upper[i] - y.coords[i])
        bump[i] = min(wiggle, 0.4 * room)
    elif at.dim > 1:
        bump[axes[-1]] = wiggle

    def curve(t):
        return y.y + t * shift + np.sin(np.pi * t) * np.sin(3 * np.pi * t) * bump
    n = at.segment_samples(y.y, y.y + shift, samples)
    return at.path_from_curve(curve, n, closed=True)


@dataclass
class PotentialReport:
    derivative: float      # max |d f - alpha|
    branch: float          # max |f_{a,d} - f_{a,e} - loop integral|
    glueing: float         # max |f_{a,d} - f_{b,d g_ab}|
    normalisation: float   # |f_{a0,e}(base)|

    def ok(self, fd: float = tol.FINITE_DIFF, q: float = tol.QUADRATURE,
           normalised: bool = True) -> bool:
        good = self.derivative < fd and self.branch < q and self.glueing < q
        return good and (self.normalisation < q or not normalised)

    def to_json(self):
        return {"derivative": self.derivative, "branch": self.branch,
                "glueing": self.glueing, "normalisation": self.normalisation}


def derivative_residual(P: MultiValuedPotential, pts: Sequence[ManifoldPoint],
                        h: float = 1e-5) -> float:
    worst = 0.0
    for pt in pts:
        y = pt.y
        grad = np.zeros(len(y))
        for i in range(len(y)):
            e = np.zeros(len(y))
            e[i] = h
            grad[i] = (P.base_branch(pt.chart, y + e) - P.base_branch(pt.chart, y - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(grad - P.form(y)))))
    return worst


def glueing_residual(P: MultiValuedPotential, rng: np.random.Generator, n: int = 100,
                     W: int = 3) -> float:
    cov = P.covering
    at = cov.atlas
    pairs = sorted(at.overlaps)
    if not pairs:
        return 0.0
    window = cov.group.window(W)
    worst = 0.0
    for _ in range(n):
        a, b = pairs[int(rng.integers(len(pairs)))]
        y = _random_overlap_point(at, a, b, rng)
        d = window[int(rng.integers(len(window)))]
        lhs = P(a, d, y)
        rhs = P(b, d * cov.cocycle.g(a, b), at.transition(a, b, y))
        worst = max(worst, abs(lhs - rhs))
    return worst


def _random_overlap_point(at: Atlas, a: int, b: int, rng: np.random.Generator) -> np.ndarray:
    s = at.overlaps[(a, b)]
    A, B = at.charts[a], at.charts[b]
    y = []
    for i in range(at.dim):
        lo = max(A.lower[i], B.lower[i] - s[i])
        hi = min(A.upper[i], B.upper[i] - s[i])
        lo = -3.0 if np.isinf(lo) else lo
        hi = 3.0 if np.isinf(hi) else hi
        m = 0.02 * (hi - lo)
        y.append(rng.uniform(lo + m, hi - m))
    return np.array(y)


def branch_residual(P: MultiValuedPotential, pts: Sequence[ManifoldPoint],
                    words: Sequence[Sequence[int]]) -> float:
    """Compare f_{a,d}(y) - f_{a,e}(y) with the integral over a loop at y of deck element d."""
    cov = P.covering
    worst = 0.0
    for pt in pts:
        for w in words:
            loop = loop_at(cov, pt, w)
            x0 = CoverPoint(pt.chart, cov.group.identity(), pt.coords)
            d = cov.loop_deck_element(loop, x0)
            lhs = P(pt.chart, d, pt.y) - P(pt.chart, cov.group.identity(), pt.y)
            worst = max(worst, abs(lhs - integrate_path(P.form, loop)))
    return worst


def verify_potential(P: MultiValuedPotential, rng: np.random.Generator, n: int = 100,
                     W: int = 3) -> PotentialReport:
    cov = P.covering
    at = cov.atlas
    pts = at.sample_points(rng, 20)
    k = sum(1 for p in at.periods if p is not None)
    words = [[1] * k, [-1] * k, [2] + [0] * (k - 1)] if k else []
    base = at.base
    return PotentialReport(
        derivative=derivative_residual(P, pts),
        branch=branch_residual(P, pts[:5], words) if words else 0.0,
        glueing=glueing_residual(P, rng, n, W),
        normalisation=abs(P.base_branch(base.chart, base.y)),
    )


# regauging

@dataclass
class Regauge:
    potential: MultiValuedPotential
    k: dict
    freedom: str


def propagate_k(c_old: CechCocycle, c_new: CechCocycle, k_base: GroupElement) -> dict:
    """k with g'_ab k_b = k_a g_ab, fixed along a BFS tree from chart 0 and checked everywhere."""
    at = c_old.atlas
    k = {0: k_base}
    q = deque([0])
    while q:
        a = q.popleft()
        for b in at.neighbours(a):
            if b not in k:
                k[b] = c_new.g(a, b).inverse() * k[a] * c_old.g(a, b)
                q.append(b)
    for (a, b) in at.overlaps:
        if c_new.g(a, b) * k[b] != k[a] * c_old.g(a, b):
            raise FormError(f"k does not intertwine the cocycles on ({a},{b})")
    return k


def regauge_potential(P: MultiValuedPotential, h: Mapping[int, GroupElement],
                      k_base: GroupElement | None = None, constant: float = 0.0) -> Regauge:
    """Potential for the cocycle g' = h^-1 g h: f'_{a,d} = f_{a,d k_a} + constant.

    k_{a0} must lie in h_{a0}^-1 Z(D); the default is h_{a0}^-1.
    """
    cov = P.covering
    G = cov.group
    h = {a: G.element(v) for a, v in h.items()}
    a0 = 0
    if k_base is None:
        k_base = h[a0].inverse()
    k_base = G.element(k_base)
    Z = center(G)
    if not Z.contains(h[a0] * k_base):
        raise FormError("k at the base chart must lie in h_a0^-1 Z(D)")
    new = apply_coboundary(cov.cocycle, h)
    k = propagate_k(cov.cocycle, new, k_base)
    cov2 = Covering(cov.atlas, new)
    C2 = {a: P.constants[a] + P.periods(k[a]) + constant for a in P.constants}
    P2 = MultiValuedPotential(P.form, cov2, P.periods, C2, dict(P.anchors))
    freedom = "k_a0 ranges over h_a0^-1 Z(D)" + (" = D (abelian)" if G.is_abelian else "")
    return Regauge(P2, k, freedom)


# deck-group cochains with values in functions on the cover

def pullback(cov: Covering):
    """Right action of D on functions on the cover: (gamma^* F)(x) = F(gamma x)."""
    return lambda gamma, F: (lambda x: F(cov.deck_act(gamma, x)))


def _fadd(F, G):
    return lambda x: F(x) + G(x)


def _fneg(F):
    return lambda x: -F(x)


def deck_form_delta(alpha: GroupCochain, cov: Covering) -> GroupCochain:
    """Coboundary of a D-cochain with values in functions on the cover (pullback action)."""
    return group_delta(alpha, pullback(cov), lambda a, b: a * b, side="right",
                       add=_fadd, neg=_fneg)


def constancy_deviation(P: MultiValuedPotential, gammas: Sequence[GroupElement],
                        pts: Sequence[CoverPoint]) -> float:
    """sup |(gamma^* F - F)(x) - c(gamma)| for the potential F on the cover."""
    F = GroupCochain(0, lambda: P.at)
    dF = deck_form_delta(F, P.covering)
    worst = 0.0
    for g in gammas:
        f = dF(g)
        for x in pts:
            worst = max(worst, abs(f(x) - P.periods(g)))
    return worst
