"""Coverings built from a cocycle, path lifting, intermediate covers and cotangent lifts.

A cover point is written (a, d, y): chart a, deck label d, chart coordinates y.
(a, d, y) and (b, d*g_ab, T_ab(y)) name the same point. Deck elements act on
the left on labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import tolerances as tol
from .atlas import TWO_PI, Atlas, AtlasError, ChartPath, ManifoldPoint
from .cech import CechCocycle, holonomy, verify_cocycle
from .groups import (DeckGroup, GroupElement, GroupHom, NotAnAutomorphism, Subgroup,
                     is_inner_automorphism)


class CoveringError(ValueError):
    pass


@dataclass(frozen=True)
class CoverPoint:
    chart: int
    label: GroupElement
    coords: tuple

    @staticmethod
    def make(chart: int, label: GroupElement, coords) -> "CoverPoint":
        return CoverPoint(int(chart), label, tuple(float(c) for c in np.atleast_1d(coords)))

    @property
    def y(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def to_json(self):
        return {"chart": self.chart, "label": self.label.to_json(), "coords": list(self.coords)}


@dataclass(eq=False)
class Covering:
    atlas: Atlas
    cocycle: CechCocycle

    def __post_init__(self):
        if self.cocycle.atlas is not self.atlas:
            raise CoveringError("cocycle belongs to another atlas")
        rep = verify_cocycle(self.cocycle)
        if not rep.ok:
            v = rep.violations[0]
            raise CoveringError(f"not a cocycle: {v.axiom} fails at {v.charts}")

    @property
    def group(self) -> DeckGroup:
        return self.cocycle.group

    @property
    def base(self) -> CoverPoint:
        b = self.atlas.base
        return CoverPoint.make(b.chart, self.group.identity(), b.coords)

    def point(self, chart: int, label, coords) -> CoverPoint:
        return CoverPoint.make(chart, self.group.element(label), coords)

    # identification
    def to_chart(self, x: CoverPoint, b: int) -> CoverPoint:
        y = self.atlas.transition(x.chart, b, x.y)
        return CoverPoint.make(b, x.label * self.cocycle.g(x.chart, b), y)

    def canonicalize(self, x: CoverPoint) -> CoverPoint:
        at = self.atlas
        if not at.charts[x.chart].contains(x.coords):
            raise AtlasError(f"{x} is outside its chart box")
        for b in range(len(at.charts)):
            s = at.shift_into(b, x.y)
            if s is not None:
                return CoverPoint.make(b, x.label * self.cocycle.g(x.chart, b), x.y + s)
        raise AtlasError("unreachable")

    def project(self, x: CoverPoint) -> ManifoldPoint:
        return self.atlas.canonicalize(ManifoldPoint.make(x.chart, x.coords))

    def same_point(self, x1: CoverPoint, x2: CoverPoint, eps: float = tol.GEOMETRY) -> bool:
        c1, c2 = self.canonicalize(x1), self.canonicalize(x2)
        return c1.chart == c2.chart and c1.label == c2.label and \
            float(np.max(np.abs(c1.y - c2.y))) < eps

    def deck_act(self, d: GroupElement, x: CoverPoint) -> CoverPoint:
        return CoverPoint(x.chart, d * x.label, x.coords)

    def deck_between(self, x1: CoverPoint, x2: CoverPoint, eps: float = 1e-7) -> GroupElement:
        """The deck element gamma with gamma . x2 = x1."""
        c1 = self.canonicalize(x1)
        if self.atlas.shift_into(c1.chart, x2.y) is None:
            raise CoveringError("points lie over different base points")
        c2 = self.to_chart(x2, c1.chart)
        if float(np.max(np.abs(c1.y - c2.y))) > eps:
            raise CoveringError(f"points lie over different base points ({c1.y} vs {c2.y})")
        return c1.label * c2.label.inverse()

    def fibre(self, y: ManifoldPoint, W: int = 3) -> list[CoverPoint]:
        return [CoverPoint(y.chart, d, y.coords) for d in self.group.window(W)]

    # paths
    def lift_path(self, path: ChartPath, start: CoverPoint) -> list[CoverPoint]:
        """Lift a chart path from ``start``; the label picks up g_ab at each chart switch."""
        seg0 = path.segments[0]
        x0 = self.to_chart(start, seg0.chart)
        if float(np.max(np.abs(x0.y - seg0.coords[0]))) > tol.GEOMETRY:
            raise CoveringError("start point does not lie over the path start")
        d = x0.label
        out = []
        prev = None
        for k, seg in enumerate(path.segments):
            if prev is not None:
                d = d * self.cocycle.g(prev, seg.chart)
            pts = seg.coords if k == 0 else seg.coords[1:]
            out.extend(CoverPoint.make(seg.chart, d, y) for y in pts)
            prev = seg.chart
        return out

    def lift_endpoint(self, path: ChartPath, start: CoverPoint) -> CoverPoint:
        return self.lift_path(path, start)[-1]

    def loop_deck_element(self, loop: ChartPath, base: CoverPoint | None = None) -> GroupElement:
        """Deck element carrying the lift's start to its end."""
        base = self.base if base is None else base
        x0 = self.to_chart(base, loop.segments[0].chart)
        end = self.lift_endpoint(loop, x0)
        return self.deck_between(end, x0)

    def holonomy_hom(self) -> GroupHom:
        """Holonomy on the generator loops as an endomorphism of D (D = Z^k only)."""
        k = self.atlas.n_generators
        G = self.group
        if k == 0:
            if G.order != 1:
                raise CoveringError("no generator loops but a nontrivial deck group")
            return GroupHom.identity(G)
        if G.kind != "Z" or G.rank != k:
            raise CoveringError(f"deck group {G!r} is not the fundamental group Z^{k}")
        imgs = tuple(holonomy(self.cocycle, self.atlas.generator_path(i)) for i in range(k))
        return GroupHom(G, G, imgs)

    def simply_connected_witness(self) -> GroupElement:
        """Witness that the holonomy is inner; raises CoveringError otherwise."""
        try:
            f = self.holonomy_hom()
            w = is_inner_automorphism(f)
        except NotAnAutomorphism as err:
            raise CoveringError(f"holonomy is not an automorphism: {err}") from None
        if w is None:
            raise CoveringError("holonomy is not an inner automorphism")
        return w

    def is_simply_connected(self) -> bool:
        try:
            self.simply_connected_witness()
            return True
        except CoveringError:
            return False

    # standard universal cover of the built-in manifolds
    @cached_property
    def is_standard(self) -> bool:
        std = CechCocycle.standard(self.atlas)
        return std.group == self.group and all(
            std.values[k] == self.cocycle.g(*k) for k in self.atlas.overlaps)

    def _periodic_axes(self):
        return [i for i, P in enumerate(self.atlas.periods) if P is not None]

    def unwrap(self, x: CoverPoint) -> np.ndarray:
        """Coordinates on the universal cover R^n: y + 2*pi*d on the periodic axes."""
        if not self.is_standard:
            raise CoveringError("unwrap needs the standard cocycle")
        g = x.y.copy()
        if self.group.kind == "Z":
            for j, i in enumerate(self._periodic_axes()):
                g[i] += TWO_PI * x.label.value[j]
        return g

    def from_unwrapped(self, g) -> CoverPoint:
        if not self.is_standard:
            raise CoveringError("from_unwrapped needs the standard cocycle")
        g = np.atleast_1d(np.asarray(g, dtype=float))
        pt = self.atlas.canonical(g)
        axes = self._periodic_axes()
        if self.group.kind != "Z":
            return CoverPoint.make(pt.chart, self.group.identity(), pt.coords)
        lab = tuple(int(round((g[i] - pt.coords[i]) / TWO_PI)) for i in axes)
        return CoverPoint.make(pt.chart, self.group.element(lab), pt.coords)

    def sample_points(self, rng: np.random.Generator, n: int, W: int = 2) -> list[CoverPoint]:
        window = self.group.window(W)
        out = []
        for y in self.atlas.sample_points(rng, n):
            d = window[int(rng.integers(len(window)))]
            out.append(CoverPoint(y.chart, d, y.coords))
        return out


# intermediate covers

@dataclass(frozen=True)
class SheetPoint:
    """Point k_a([d0], y) of an intermediate cover."""
    chart: int
    coset: GroupElement       # canonical representative d0
    coords: tuple


@dataclass(eq=False)
class IntermediateCovering:
    """The cover Z = X/H for a subgroup H of the deck group."""
    parent: Covering
    H: Subgroup
    window: int = 3

    def __post_init__(self):
        if self.H.group != self.parent.group:
            raise CoveringError("subgroup of another group")

    @cached_property
    def reps(self) -> list[GroupElement]:
        return self.H.coset_reps(self.window)

    def coset(self, d: GroupElement) -> GroupElement:
        return self.H.coset_rep(d)

    def r(self, x: CoverPoint) -> SheetPoint:
        return SheetPoint(x.chart, self.coset(x.label), x.coords)

    def k(self, a: int, d: GroupElement, y) -> SheetPoint:
        return SheetPoint(a, self.coset(d), tuple(float(v) for v in np.atleast_1d(y)))

    def q(self, z: SheetPoint) -> ManifoldPoint:
        return self.parent.atlas.canonicalize(ManifoldPoint.make(z.chart, z.coords))

    def j(self, a: int, d0: GroupElement, h: GroupElement, y) -> CoverPoint:
        """j_{a,[d0]}(h, k_a([d0], y)) = i_a(h d0, y)."""
        if not self.H.contains(h):
            raise CoveringError(f"{h} is not in H")
        return CoverPoint.make(a, h * self.coset(d0), y)

    def j_inverse(self, x: CoverPoint) -> tuple[int, GroupElement, GroupElement, tuple]:
        d0 = self.coset(x.label)
        return x.chart, d0, x.label * d0.inverse(), x.coords

    def hat_g(self, a: int, d0: GroupElement, b: int) -> tuple[GroupElement, GroupElement]:
        """(d0', g_hat) on the overlap of U_{a,[d0]} with U_{b,[d0 g_ab]}."""
        g = self.parent.cocycle.g(a, b)
        d0 = self.coset(d0)
        d1 = self.coset(d0 * g)
        gh = d0 * g * d1.inverse()
        if not self.H.contains(gh):
            raise CoveringError("induced cocycle left H")
        return d1, gh

    def sheets(self) -> list[tuple[int, GroupElement]]:
        n = len(self.parent.atlas.charts)
        return [(a, d0) for d0 in self.reps for a in range(n)]

    def induced_cocycle(self) -> dict:
        """((a,[d0]), (b,[d0'])) -> g_hat in H over all sheet overlaps in the window."""
        at = self.parent.atlas
        have = set(self.sheets())
        out = {}
        for (a, d0) in self.sheets():
            for b in [a] + at.neighbours(a):
                d1, gh = self.hat_g(a, d0, b)
                if (b, d1) in have:
                    out[((a, d0), (b, d1))] = gh
        return out


# cotangent lifts

@dataclass
class ChartMap:
    """A smooth map written in global coordinates, with optional analytic Jacobian."""
    fn: Callable
    jac: Callable | None = None

    def __call__(self, g):
        return np.atleast_1d(np.asarray(self.fn(np.asarray(g, dtype=float)), dtype=float))

    def jacobian(self, g, h: float = tol.FD_STEP) -> np.ndarray:
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if self.jac is not None:
            return np.atleast_2d(np.asarray(self.jac(g), dtype=float))
        n = len(g)
        J = np.zeros((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            J[:, i] = (self(g + e) - self(g - e)) / (2 * h)
        return J

    def compose(self, other: "ChartMap") -> "ChartMap":
        """self after other."""
        if self.jac is not None and other.jac is not None:
            return ChartMap(lambda g: self(other(g)),
                            lambda g: self.jacobian(other(g)) @ other.jacobian(g))
        return ChartMap(lambda g: self(other(g)))


def cotangent_map(f: ChartMap, g, covector) -> tuple[np.ndarray, np.ndarray]:
    """*f(m, p) = (f(m), (f^-1)^* p): covector components transform by Df^-T."""
    J = f.jacobian(g)
    return f(g), np.linalg.solve(J.T, np.atleast_1d(np.asarray(covector, dtype=float)))


def cotangent_projection(cov: Covering, x: CoverPoint, covector) -> tuple[ManifoldPoint, np.ndarray]:
    """*p for the covering projection; p is the identity in chart coordinates."""
    return cov.project(x), np.atleast_1d(np.asarray(covector, dtype=float)).copy()


def _star_p_coords(cov: Covering, x: CoverPoint, b: int):
    """Chart-coordinate expression of *p near (x, .) into base chart b."""
    s = cov.atlas.transition(x.chart, b, x.y) - x.y
    dim = cov.atlas.dim

    def F(z):
        return np.concatenate([z[:dim] + s, z[dim:]])
    return F


def canonical_pullback_residual(cov: Covering, x: CoverPoint, covector, V,
                                h: float = 1e-3) -> float:
    """|(*p)^* theta (V) - Theta(V)| at (x, covector); V a tangent vector of T*X."""
    base, q = cotangent_projection(cov, x, covector)
    F = _star_p_coords(cov, x, base.chart)
    z = np.concatenate([x.y, np.atleast_1d(covector)])
    V = np.asarray(V, dtype=float)
    pushed = (F(z + h * V) - F(z - h * V)) / (2 * h)
    dim = cov.atlas.dim
    theta_y = float(np.dot(q, pushed[:dim]))
    Theta_x = float(np.dot(np.atleast_1d(covector), V[:dim]))
    return abs(theta_y - Theta_x)


def star_p_symplectic_residual(cov: Covering, x: CoverPoint, covector, h: float = 1e-4) -> float:
    """max |(*p)^* omega - omega| on coordinate pairs, omega = sum dq^i ^ dp_i."""
    base, _ = cotangent_projection(cov, x, covector)
    F = _star_p_coords(cov, x, base.chart)
    z = np.concatenate([x.y, np.atleast_1d(covector)])
    n = len(z)
    J = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (F(z + e) - F(z - e)) / (2 * h)
    dim = cov.atlas.dim
    Om = np.zeros((n, n))
    Om[:dim, dim:] = np.eye(dim)
    Om[dim:, :dim] = -np.eye(dim)
    return float(np.max(np.abs(J.T @ Om @ J - Om)))
