"""Čech 1-cocycles with values in a deck group, coboundaries and holonomy.

Abelian cochains of any arity and their coboundary live here too.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .atlas import TWO_PI, Atlas, ChartPath
from .groups import DeckGroup, GroupElement


class CochainSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    axiom: str
    charts: tuple
    detail: str = ""


@dataclass
class CocycleReport:
    ok: bool
    violations: list = field(default_factory=list)

    def to_json(self):
        return {"ok": self.ok,
                "violations": [{"axiom": v.axiom, "charts": list(v.charts), "detail": v.detail}
                               for v in self.violations]}


@dataclass(eq=False)
class CechCocycle:
    """Deck-group valued 1-cochain g_ab on the overlaps of an atlas."""
    atlas: Atlas
    group: DeckGroup
    values: dict

    def g(self, a: int, b: int) -> GroupElement:
        if a == b:
            return self.values.get((a, a), self.group.identity())
        return self.values[(a, b)]

    __call__ = g

    @staticmethod
    def from_edges(atlas: Atlas, group: DeckGroup, edges: Mapping) -> "CechCocycle":
        """Build from a partial table of edges.

        A pair listed in one direction only gets the inverse in the other
        direction; pairs not listed at all get the identity. Diagonal entries
        are kept as given so that bad ones can be reported.
        """
        vals = {}
        for (a, b), v in edges.items():
            a, b = int(a), int(b)
            if a != b and (a, b) not in atlas.overlaps:
                raise CochainSchemaError(f"charts {a},{b} do not overlap")
            if not 0 <= a < len(atlas.charts) or not 0 <= b < len(atlas.charts):
                raise CochainSchemaError(f"no chart pair ({a},{b})")
            vals[(a, b)] = group.element(v)
        for (a, b) in atlas.overlaps:
            if (a, b) in vals:
                continue
            vals[(a, b)] = vals[(b, a)].inverse() if (b, a) in vals else group.identity()
        return CechCocycle(atlas, group, vals)

    @staticmethod
    def standard(atlas: Atlas) -> "CechCocycle":
        """Cocycle of the universal cover i_a(d, y) = y + 2*pi*d on the periodic axes."""
        axes = [i for i, P in enumerate(atlas.periods) if P is not None]
        if not axes:
            G = DeckGroup.trivial()
            return CechCocycle(atlas, G, {k: G.identity() for k in atlas.overlaps})
        G = DeckGroup.Z(len(axes))
        vals = {}
        for (a, b), s in atlas.overlaps.items():
            vals[(a, b)] = G.element(tuple(-int(round(s[i] / TWO_PI)) for i in axes))
        return CechCocycle(atlas, G, vals)

    def to_json(self):
        return [{"a": a, "b": b, "g": v.to_json()} for (a, b), v in sorted(self.values.items())]


def verify_cocycle(c: CechCocycle) -> CocycleReport:
    at = c.atlas
    e = c.group.identity()
    bad = []
    n = len(at.charts)
    for a in range(n):
        if c.g(a, a) != e:
            bad.append(Violation("Coc1", (a,), f"g_aa = {c.g(a, a)}"))
    for (a, b) in sorted(at.overlaps):
        if c.g(b, a) != c.g(a, b).inverse():
            bad.append(Violation("Coc2", (a, b), f"g_ba = {c.g(b, a)}, g_ab = {c.g(a, b)}"))
    for a, b, k in itertools.permutations(range(n), 3):
        if at.nonempty((a, b, k)) and c.g(a, k) != c.g(a, b) * c.g(b, k):
            bad.append(Violation("Coc3", (a, b, k),
                                 f"g_ac = {c.g(a, k)} but g_ab g_bc = {c.g(a, b) * c.g(b, k)}"))
    return CocycleReport(not bad, bad)


def apply_coboundary(c: CechCocycle, h: Mapping[int, GroupElement]) -> CechCocycle:
    """g'_ab = h_a^-1 g_ab h_b."""
    G = c.group
    h = {a: G.element(h[a]) for a in range(len(c.atlas.charts))}
    vals = {(a, b): h[a].inverse() * g * h[b] for (a, b), g in c.values.items()}
    return CechCocycle(c.atlas, G, vals)


def _bfs_tree(atlas: Atlas, root: int = 0) -> list[tuple[int, int]]:
    seen = {root}
    order = []
    q = deque([root])
    while q:
        a = q.popleft()
        for b in atlas.neighbours(a):
            if b not in seen:
                seen.add(b)
                order.append((a, b))
                q.append(b)
    if len(seen) != len(atlas.charts):
        raise CochainSchemaError("atlas nerve is disconnected")
    return order


def are_cohomologous(c1: CechCocycle, c2: CechCocycle) -> dict | None:
    """A 0-cochain h with c2 = h^-1 c1 h, or None.

    h is propagated along a BFS spanning tree from chart 0 and checked on all
    remaining overlaps. For finite groups every base value is tried in order
    and the first success is returned; for Z^k the base value is the identity
    (any constant shift of a witness is again a witness).
    """
    if c1.group != c2.group or c1.atlas is not c2.atlas:
        raise CochainSchemaError("cocycles live on different atlases or groups")
    G = c1.group
    tree = _bfs_tree(c1.atlas)
    candidates = [G.identity()] if G.kind == "Z" else G.elements()
    for h0 in candidates:
        h = {0: h0}
        for a, b in tree:
            h[b] = c1.g(a, b).inverse() * h[a] * c2.g(a, b)
        if all(h[a].inverse() * c1.g(a, b) * h[b] == c2.g(a, b)
               for (a, b) in c1.atlas.overlaps):
            return h
    return None


def holonomy(c: CechCocycle, loop: ChartPath) -> GroupElement:
    """rho = g_{a0 a1} g_{a1 a2} ... g_{an a0} along the loop's chart sequence."""
    seq = loop.chart_sequence()
    out = c.group.identity()
    for a, b in zip(seq, seq[1:]):
        out = out * c.g(a, b)
    return out


# abelian cochains of higher arity

def nerve(atlas: Atlas, n: int):
    """Ordered (n+1)-tuples of charts with nonempty common intersection."""
    for tup in itertools.product(range(len(atlas.charts)), repeat=n + 1):
        if atlas.nonempty(tup):
            yield tup


@dataclass(eq=False)
class CechCochain:
    """Abelian n-cochain: nerve tuple -> value supporting + and -."""
    atlas: Atlas
    arity: int
    values: dict

    def __call__(self, *charts):
        return self.values[tuple(charts)]


def cech_delta(f: CechCochain) -> CechCochain:
    """(df)(a0..a_{n+1}) = sum_k (-1)^k f(a0..^ak..a_{n+1})."""
    out = {}
    for tup in nerve(f.atlas, f.arity + 1):
        acc = None
        for k in range(len(tup)):
            v = f.values[tup[:k] + tup[k + 1:]]
            term = v if k % 2 == 0 else -v
            acc = term if acc is None else acc + term
        out[tup] = acc
    return CechCochain(f.atlas, f.arity + 1, out)


def random_cochain(atlas: Atlas, arity: int, rng: np.random.Generator,
                   rank: int = 1, low: int = -9, high: int = 10) -> CechCochain:
    vals = {tup: rng.integers(low, high, size=rank) for tup in nerve(atlas, arity)}
    return CechCochain(atlas, arity, vals)
