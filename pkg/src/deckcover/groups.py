"""Discrete deck groups: free abelian groups, cyclic groups and finite tables.

Elements remember their parent group. Mixing elements of different
groups raises :class:`GroupMismatchError`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

INFINITE = math.inf


class GroupError(ValueError):
    pass


class GroupMismatchError(GroupError):
    pass


class NotAnAutomorphism(GroupError):
    """Raised when a map handed to the inner-automorphism test is not bijective."""


@dataclass(frozen=True, eq=True)
class DeckGroup:
    kind: str                       # "Z", "Zn" or "table"
    rank: int = 0
    n: int = 0
    table: tuple = ()
    names: tuple = ()
    gens: tuple = ()

    def __post_init__(self):
        if self.kind == "Z":
            if self.rank < 1:
                raise GroupError("Z^k needs rank >= 1")
        elif self.kind == "Zn":
            if self.n < 1:
                raise GroupError("Z_n needs n >= 1")
        elif self.kind == "table":
            _check_table(self.table)
        else:
            raise GroupError(f"unknown group kind {self.kind!r}")

    # construction helpers
    @staticmethod
    def Z(rank: int = 1) -> "DeckGroup":
        return DeckGroup("Z", rank=rank)

    @staticmethod
    def Zn(n: int) -> "DeckGroup":
        return DeckGroup("Zn", n=n)

    @staticmethod
    def trivial() -> "DeckGroup":
        return DeckGroup("Zn", n=1)

    @staticmethod
    def from_table(table: Sequence[Sequence[int]], names: Sequence[str] | None = None,
                   generators: Sequence[int] | None = None) -> "DeckGroup":
        t = tuple(tuple(int(v) for v in row) for row in table)
        nm = tuple(names) if names is not None else tuple(str(i) for i in range(len(t)))
        g = DeckGroup("table", table=t, names=nm, gens=())
        gens = tuple(generators) if generators is not None else _greedy_generators(g)
        return DeckGroup("table", table=t, names=nm, gens=gens)

    def __repr__(self):
        if self.kind == "Z":
            return f"Z^{self.rank}" if self.rank > 1 else "Z"
        if self.kind == "Zn":
            return f"Z_{self.n}"
        return f"TableGroup(order={len(self.table)})"

    # basic data
    @property
    def is_finite(self) -> bool:
        return self.kind != "Z"

    @property
    def order(self) -> float:
        if self.kind == "Z":
            return INFINITE
        if self.kind == "Zn":
            return self.n
        return len(self.table)

    @cached_property
    def is_abelian(self) -> bool:
        if self.kind != "table":
            return True
        t = self.table
        return all(t[a][b] == t[b][a] for a in range(len(t)) for b in range(a))

    def identity(self) -> "GroupElement":
        if self.kind == "Z":
            return GroupElement(self, (0,) * self.rank)
        if self.kind == "Zn":
            return GroupElement(self, 0)
        return GroupElement(self, _table_identity(self.table))

    def element(self, value) -> "GroupElement":
        """Build an element from a raw value (int, tuple of ints, or table name)."""
        if isinstance(value, GroupElement):
            self._own(value)
            return value
        if self.kind == "Z":
            if isinstance(value, (int,)) and not isinstance(value, bool):
                value = (value,)
            v = tuple(int(x) for x in value)
            if len(v) != self.rank:
                raise GroupError(f"expected {self.rank} integers, got {value!r}")
            return GroupElement(self, v)
        if self.kind == "Zn":
            if isinstance(value, (list, tuple)):
                if len(value) != 1:
                    raise GroupError(f"bad Z_n element {value!r}")
                value = value[0]
            return GroupElement(self, int(value) % self.n)
        if isinstance(value, str):
            if value not in self.names:
                raise GroupError(f"unknown element name {value!r}")
            return GroupElement(self, self.names.index(value))
        if isinstance(value, (list, tuple)) and len(value) == 1:
            value = value[0]
        i = int(value)
        if not 0 <= i < len(self.table):
            raise GroupError(f"table index {i} out of range")
        return GroupElement(self, i)

    def generators(self) -> tuple["GroupElement", ...]:
        if self.kind == "Z":
            return tuple(GroupElement(self, tuple(int(i == j) for j in range(self.rank)))
                         for i in range(self.rank))
        if self.kind == "Zn":
            return () if self.n == 1 else (GroupElement(self, 1),)
        return tuple(GroupElement(self, g) for g in self.gens)

    def elements(self) -> list["GroupElement"]:
        if self.kind == "Z":
            raise GroupError("Z^k is infinite; use window()")
        if self.kind == "Zn":
            return [GroupElement(self, i) for i in range(self.n)]
        return [GroupElement(self, i) for i in range(len(self.table))]

    def window(self, W: int) -> list["GroupElement"]:
        """Elements with every coordinate in [-W, W]; all elements for finite groups."""
        if self.kind != "Z":
            return self.elements()
        rng = range(-W, W + 1)
        return [GroupElement(self, v) for v in itertools.product(rng, repeat=self.rank)]

    def _own(self, x: "GroupElement"):
        if x.group != self:
            raise GroupMismatchError(f"element of {x.group!r} used in {self!r}")

    # operations
    def compose(self, a: "GroupElement", b: "GroupElement") -> "GroupElement":
        self._own(a)
        self._own(b)
        if self.kind == "Z":
            return GroupElement(self, tuple(x + y for x, y in zip(a.value, b.value)))
        if self.kind == "Zn":
            return GroupElement(self, (a.value + b.value) % self.n)
        return GroupElement(self, self.table[a.value][b.value])

    def inverse(self, a: "GroupElement") -> "GroupElement":
        self._own(a)
        if self.kind == "Z":
            return GroupElement(self, tuple(-x for x in a.value))
        if self.kind == "Zn":
            return GroupElement(self, (-a.value) % self.n)
        e = _table_identity(self.table)
        row = self.table[a.value]
        return GroupElement(self, row.index(e))

    def power(self, a: "GroupElement", k: int) -> "GroupElement":
        self._own(a)
        if self.kind == "Z":
            return GroupElement(self, tuple(k * x for x in a.value))
        if self.kind == "Zn":
            return GroupElement(self, (k * a.value) % self.n)
        base = a if k >= 0 else self.inverse(a)
        out = self.identity()
        for _ in range(abs(k)):
            out = self.compose(out, base)
        return out


@dataclass(frozen=True)
class GroupElement:
    group: DeckGroup = field(repr=False)
    value: object

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.group.compose(self, other)

    def inverse(self) -> "GroupElement":
        return self.group.inverse(self)

    def __pow__(self, k: int) -> "GroupElement":
        return self.group.power(self, k)

    @property
    def is_identity(self) -> bool:
        return self == self.group.identity()

    def sort_key(self):
        v = self.value
        return v if isinstance(v, tuple) else (v,)

    def to_json(self):
        if self.group.kind == "Z":
            return list(self.value)
        if self.group.kind == "table":
            return self.group.names[self.value]
        return self.value

    def __repr__(self):
        if self.group.kind == "table":
            return self.group.names[self.value]
        if self.group.kind == "Z" and self.group.rank == 1:
            return str(self.value[0])
        return str(self.value)


def _check_table(t):
    n = len(t)
    if n == 0:
        raise GroupError("empty table")
    for row in t:
        if len(row) != n or sorted(row) != list(range(n)):
            raise GroupError("table rows must be permutations of 0..n-1")
    for j in range(n):
        if sorted(t[i][j] for i in range(n)) != list(range(n)):
            raise GroupError("table columns must be permutations of 0..n-1")
    e = _table_identity(t)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                if t[t[a][b]][c] != t[a][t[b][c]]:
                    raise GroupError(f"table not associative at ({a},{b},{c})")
    if e is None:
        raise GroupError("table has no identity")


def _table_identity(t):
    n = len(t)
    for e in range(n):
        if all(t[e][x] == x and t[x][e] == x for x in range(n)):
            return e
    return None


def _closure(t, gens) -> set:
    e = _table_identity(t)
    seen = {e}
    frontier = [e]
    while frontier:
        x = frontier.pop()
        for g in gens:
            y = t[x][g]
            if y not in seen:
                seen.add(y)
                frontier.append(y)
    return seen


def _greedy_generators(g: DeckGroup) -> tuple:
    gens = []
    n = len(g.table)
    span = _closure(g.table, gens)
    for x in range(n):
        if len(span) == n:
            break
        if x not in span:
            gens.append(x)
            span = _closure(g.table, gens)
    return tuple(gens)


def symmetric_group(k: int) -> DeckGroup:
    """S_k as a table group; names in 1-based cycle notation, product a*b = a after b."""
    perms = sorted(itertools.permutations(range(k)))
    index = {p: i for i, p in enumerate(perms)}
    table = [[index[tuple(p[q[i]] for i in range(k))] for q in perms] for p in perms]
    return DeckGroup.from_table(table, [_cycle_name(p) for p in perms])


def _cycle_name(p) -> str:
    seen, parts = set(), []
    for s in range(len(p)):
        if s in seen or p[s] == s:
            continue
        cyc, x = [], s
        while x not in seen:
            seen.add(x)
            cyc.append(str(x + 1))
            x = p[x]
        parts.append("(" + "".join(cyc) + ")")
    return "".join(parts) or "e"


def compose(a: GroupElement, b: GroupElement) -> GroupElement:
    if a.group != b.group:
        raise GroupMismatchError("elements come from different groups")
    return a.group.compose(a, b)


def inverse(a: GroupElement) -> GroupElement:
    return a.group.inverse(a)


def element_order(a: GroupElement) -> float:
    g = a.group
    if g.kind == "Z":
        return 1 if a.is_identity else INFINITE
    if g.kind == "Zn":
        return g.n // math.gcd(g.n, a.value)
    x, k = a, 1
    while not x.is_identity:
        x = x * a
        k += 1
    return k


# subgroups

def _integer_echelon(rows: list[list[int]], k: int) -> list[tuple[int, list[int]]]:
    """Hermite-style echelon basis of the lattice spanned by ``rows``.

    Returns (pivot column, row) pairs with positive pivots; entries above each
    pivot are reduced into [0, pivot).
    """
    rows = [list(r) for r in rows if any(r)]
    out: list[tuple[int, list[int]]] = []
    for col in range(k):
        active = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        while len(active) > 1:
            active.sort(key=lambda r: abs(r[col]))
            p = active[0]
            nxt = [p]
            for r in active[1:]:
                q = r[col] // p[col]
                r2 = [x - q * y for x, y in zip(r, p)]
                if r2[col] != 0:
                    nxt.append(r2)
                elif any(r2):
                    rest.append(r2)
            active = nxt
        if active:
            p = active[0]
            if p[col] < 0:
                p = [-x for x in p]
            for i, (c, r) in enumerate(out):
                q = r[col] // p[col]
                out[i] = (c, [x - q * y for x, y in zip(r, p)])
            out.append((col, p))
        rows = rest
    return out


@dataclass(frozen=True)
class Subgroup:
    group: DeckGroup
    generators: tuple

    def __post_init__(self):
        for h in self.generators:
            self.group._own(h)

    @staticmethod
    def generated_by(group: DeckGroup, gens: Iterable) -> "Subgroup":
        return Subgroup(group, tuple(group.element(g) for g in gens))

    @staticmethod
    def from_elements(group: DeckGroup, elements: Iterable) -> "Subgroup":
        """Subgroup given by an explicit finite element list; closure is checked."""
        els = {group.element(x) for x in elements}
        for a in els:
            for b in els:
                if a * b.inverse() not in els:
                    raise GroupError(f"element list not closed: {a} * {b}^-1 missing")
        if group.identity() not in els:
            raise GroupError("element list misses the identity")
        return Subgroup(group, tuple(sorted(els, key=GroupElement.sort_key)))

    @cached_property
    def _lattice(self):
        return _integer_echelon([list(h.value) for h in self.generators], self.group.rank)

    @cached_property
    def _modulus(self) -> int:
        m = self.group.n
        for h in self.generators:
            m = math.gcd(m, h.value)
        return m

    @cached_property
    def _members(self) -> frozenset:
        return frozenset(_closure(self.group.table, [h.value for h in self.generators]))

    def contains(self, d: GroupElement) -> bool:
        self.group._own(d)
        if self.group.kind == "Z":
            return all(v == 0 for v in self._reduce(d.value))
        if self.group.kind == "Zn":
            return d.value % self._modulus == 0
        return d.value in self._members

    __contains__ = contains

    def _reduce(self, v):
        v = list(v)
        for col, row in self._lattice:
            q = v[col] // row[col]
            v = [x - q * y for x, y in zip(v, row)]
        return tuple(v)

    def coset_rep(self, d: GroupElement) -> GroupElement:
        """Canonical representative of the right coset H*d.

        Z^k: the echelon-reduced vector (pivot coordinates in [0, pivot)).
        Finite groups: the smallest index in the coset.
        """
        g = self.group
        g._own(d)
        if g.kind == "Z":
            return GroupElement(g, self._reduce(d.value))
        if g.kind == "Zn":
            return GroupElement(g, d.value % self._modulus)
        return GroupElement(g, min(g.table[h][d.value] for h in self._members))

    def elements(self) -> list[GroupElement]:
        g = self.group
        if g.kind == "Z":
            if not self._lattice:
                return [g.identity()]
            raise GroupError("infinite subgroup")
        if g.kind == "Zn":
            return [GroupElement(g, i) for i in range(0, g.n, self._modulus)]
        return [GroupElement(g, i) for i in sorted(self._members)]

    def index(self) -> float:
        g = self.group
        if g.kind == "Z":
            if len(self._lattice) < g.rank:
                return INFINITE
            return math.prod(r[c] for c, r in self._lattice)
        if g.kind == "Zn":
            return self._modulus
        return len(g.table) // len(self._members)

    def coset_reps(self, W: int = 3) -> list[GroupElement]:
        """All canonical coset representatives; a window of them when the index is infinite."""
        g = self.group
        if g.kind == "Z" and self.index() == INFINITE:
            reps = {self.coset_rep(d) for d in g.window(W)}
        elif g.kind == "Z":
            piv = {c: r[c] for c, r in self._lattice}
            box = [range(piv[c]) for c in range(g.rank)]
            reps = {self.coset_rep(GroupElement(g, v)) for v in itertools.product(*box)}
        else:
            reps = {self.coset_rep(d) for d in g.elements()}
        return sorted(reps, key=GroupElement.sort_key)

    def is_whole(self) -> bool:
        return self.index() == 1


def center(G: DeckGroup) -> Subgroup:
    if G.is_abelian:
        return Subgroup(G, G.generators())
    t = G.table
    n = len(t)
    z = [a for a in range(n) if all(t[a][b] == t[b][a] for b in range(n))]
    return Subgroup(G, tuple(GroupElement(G, a) for a in z))


# homomorphisms

@dataclass(frozen=True)
class GroupHom:
    """Homomorphism given by the images of the domain generators."""
    domain: DeckGroup
    codomain: DeckGroup
    images: tuple

    def __post_init__(self):
        if len(self.images) != len(self.domain.generators()):
            raise GroupError("need one image per domain generator")
        for x in self.images:
            self.codomain._own(x)

    @staticmethod
    def from_function(domain: DeckGroup, codomain: DeckGroup,
                      fn: Callable[[GroupElement], GroupElement]) -> "GroupHom":
        return GroupHom(domain, codomain, tuple(fn(g) for g in domain.generators()))

    @staticmethod
    def identity(G: DeckGroup) -> "GroupHom":
        return GroupHom(G, G, G.generators())

    @cached_property
    def _finite_map(self) -> dict:
        # BFS over the Cayley graph; consistency is checked in is_well_defined
        d = self.domain
        e = d.identity()
        out = {e: self.codomain.identity()}
        frontier = [e]
        while frontier:
            x = frontier.pop()
            for g, img in zip(d.generators(), self.images):
                y = x * g
                if y not in out:
                    out[y] = out[x] * img
                    frontier.append(y)
        return out

    def __call__(self, x: GroupElement) -> GroupElement:
        d = self.domain
        d._own(x)
        if d.kind == "Z":
            out = self.codomain.identity()
            for k, img in zip(x.value, self.images):
                out = out * img ** k
            return out
        if d.kind == "Zn" and d.n > 1:
            return self.images[0] ** x.value
        return self._finite_map[x]

    def is_well_defined(self) -> bool:
        d = self.domain
        if d.kind == "Z":
            return True
        if d.kind == "Zn":
            return d.n == 1 or (self.images[0] ** d.n).is_identity
        m = self._finite_map
        if len(m) != len(d.table):
            return False
        return all(m[a * b] == m[a] * m[b] for a in d.elements() for b in d.elements())

    def matrix(self) -> list[list[int]]:
        """Integer matrix (columns are generator images) for Z^k -> Z^m maps."""
        if self.domain.kind != "Z" or self.codomain.kind != "Z":
            raise GroupError("matrix form only for free abelian groups")
        return [[img.value[i] for img in self.images] for i in range(self.codomain.rank)]

    def is_bijective(self) -> bool:
        d, c = self.domain, self.codomain
        if d != c:
            return False
        if d.kind == "Z":
            return abs(_int_det(self.matrix())) == 1
        if d.kind == "Zn":
            return d.n == 1 or math.gcd(self.images[0].value, d.n) == 1
        if not self.is_well_defined():
            return False
        return len(set(self._finite_map.values())) == len(d.table)


def _int_det(m: list[list[int]]) -> int:
    # Bareiss fraction-free elimination
    a = [row[:] for row in m]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1] if n else 1


def is_inner_automorphism(f: GroupHom) -> GroupElement | None:
    """Return d with f(x) = d x d^-1 for all x, or None when f is an outer automorphism.

    Raises NotAnAutomorphism if f is not a bijection of its domain.
    The smallest witness (by sort key) is returned.
    """
    if not f.is_well_defined() or not f.is_bijective():
        raise NotAnAutomorphism(f"{f!r} is not an automorphism")
    G = f.domain
    gens = G.generators()
    if G.is_abelian:
        ok = all(f(g) == g for g in gens)
        return G.identity() if ok else None
    for d in G.elements():
        di = d.inverse()
        if all(f(g) == d * g * di for g in gens):
            return d
    return None
