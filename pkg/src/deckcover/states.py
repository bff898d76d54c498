"""G-states on a window of the covering: level sets of the global moment map,
their deck orbits, and Hamiltonian flows.

The grid is a lattice on a fundamental domain of the base, repeated over a
window of deck labels. Lattice neighbours are glued through the cocycle, so
the grid is a graph on a finite piece of the cover.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .actions import GElement, LiftedAction
from .atlas import ManifoldPoint
from .covering import CoverPoint, Covering
from .expr import Expression
from .groups import GroupElement
from .moment import LocalMomentMap, TwoForm, contraction_form


class StatesError(ValueError):
    pass


@dataclass(eq=False)
class PhaseGrid:
    covering: Covering
    window: int
    spacing: float
    axes: list                   # lattice values per axis
    base_points: list            # canonical ManifoldPoint per lattice index
    labels: list                 # deck labels in the window
    edges: np.ndarray            # (E, 2) node pairs
    boundary: np.ndarray         # node mask: has a neighbour outside the label window

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def n_base(self) -> int:
        return len(self.base_points)

    @property
    def n_nodes(self) -> int:
        return self.n_base * len(self.labels)

    def node(self, label_index: int, base_index: int) -> int:
        return label_index * self.n_base + base_index

    def cover_point(self, node: int) -> CoverPoint:
        li, bi = divmod(int(node), self.n_base)
        p = self.base_points[bi]
        return CoverPoint(p.chart, self.labels[li], p.coords)

    def locate(self, x: CoverPoint, eps: float = 1e-6) -> int | None:
        """Grid node at the cover point x, or None when x is off the lattice or window."""
        cov = self.covering
        at = cov.atlas
        g = x.y
        idx = []
        for i, ax in enumerate(self.axes):
            P = at.periods[i]
            v = g[i] % P if P is not None else g[i]
            step = ax[1] - ax[0]
            k = int(round((v - ax[0]) / step))
            if P is not None:
                k %= len(ax)
            if not 0 <= k < len(ax):
                return None
            want = ax[k]
            if P is not None:
                delta = (v - want + P / 2) % P - P / 2
            else:
                delta = v - want
            if abs(delta) > eps:
                return None
            idx.append(k)
        bi = int(np.ravel_multi_index(idx, self.shape))
        p = self.base_points[bi]
        if at.shift_into(p.chart, g) is None:
            return None
        y = cov.to_chart(x, p.chart)
        try:
            li = self._label_index[y.label]
        except KeyError:
            return None
        return self.node(li, bi)

    def __post_init__(self):
        self._label_index = {d: i for i, d in enumerate(self.labels)}


def build_grid(cov: Covering, window: int = 3, spacing: float = 0.05,
               bounds: float = 3.0) -> PhaseGrid:
    at = cov.atlas
    axes = []
    for i in range(at.dim):
        P = at.periods[i]
        if P is not None:
            M = int(math.ceil(P / spacing))
            axes.append(np.arange(M) * (P / M))
        else:
            lo = max(at.charts[0].lower[i], -bounds)
            hi = min(at.charts[0].upper[i], bounds)
            M = int(math.floor((hi - lo) / spacing))
            start = lo + 0.5 * ((hi - lo) - M * spacing)
            vals = start + spacing * np.arange(M + 1)
            axes.append(vals[(vals > at.charts[0].lower[i]) & (vals < at.charts[0].upper[i])])
    shape = tuple(len(a) for a in axes)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, at.dim)
    base_points = [at.canonical(g) for g in mesh]
    labels = cov.group.window(window)
    lindex = {d: i for i, d in enumerate(labels)}
    nb = len(base_points)
    nl = len(labels)
    shifts: dict = {}          # multiplier -> (forward, backward) label index maps

    def shift_maps(m):
        if m not in shifts:
            fwd = np.array([lindex.get(d * m, -1) for d in labels])
            bwd = np.array([lindex.get(d * m.inverse(), -1) for d in labels])
            shifts[m] = (fwd, bwd)
        return shifts[m]

    src, dst = [], []
    boundary = np.zeros(nb * nl, dtype=bool)
    li = np.arange(nl)
    for bi in range(nb):
        multi = np.unravel_index(bi, shape)
        p = base_points[bi]
        for ax in range(at.dim):
            j = list(multi)
            j[ax] += 1
            step = np.zeros(at.dim)
            if at.periods[ax] is not None:
                step[ax] = at.periods[ax] / shape[ax]
                j[ax] %= shape[ax]
            else:
                if j[ax] >= shape[ax]:
                    continue
                step[ax] = axes[ax][j[ax]] - axes[ax][multi[ax]]
            bj = int(np.ravel_multi_index(j, shape))
            q = base_points[bj]
            m = None
            for c in range(len(at.charts)):
                sc = at.shift_into(c, p.y)
                if sc is None:
                    continue
                yc = p.y + sc
                if not at.charts[c].contains(yc + step):
                    continue
                if at.shift_into(q.chart, yc + step) is None:
                    continue
                z = at.transition(c, q.chart, yc + step)
                if np.max(np.abs(z - q.y)) > 1e-8:
                    raise StatesError("lattice neighbours do not match across charts")
                m = cov.cocycle.g(p.chart, c) * cov.cocycle.g(c, q.chart)
                break
            if m is None:
                raise StatesError("no chart holds a grid step; use a finer spacing")
            fwd, bwd = shift_maps(m)
            ok = fwd >= 0
            src.append(li[ok] * nb + bi)
            dst.append(fwd[ok] * nb + bj)
            boundary[li[~ok] * nb + bi] = True
            boundary[li[bwd < 0] * nb + bj] = True
    if src:
        edges = np.stack([np.concatenate(src), np.concatenate(dst)], axis=1).astype(np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return PhaseGrid(cov, window, spacing, axes, base_points, labels, edges, boundary)


def moment_on_grid(J: LocalMomentMap, grid: PhaseGrid) -> np.ndarray:
    """J_hat at every node, shape (n_nodes, dim)."""
    nb = grid.n_base
    base_vals = np.zeros((nb, J.dim))
    by_chart: dict = {}
    for bi, p in enumerate(grid.base_points):
        by_chart.setdefault(p.chart, []).append(bi)
    for a, idx in by_chart.items():
        Y = np.array([grid.base_points[i].coords for i in idx])
        e = J.covering.group.identity()
        base_vals[idx] = J.many(a, e, Y)
    out = np.zeros((grid.n_nodes, J.dim))
    for li, d in enumerate(grid.labels):
        out[li * nb:(li + 1) * nb] = base_vals + J.periods(d)[None, :]
    return out


def moment_gradient_bound(J: LocalMomentMap, grid: PhaseGrid) -> float:
    Y = np.array([p.coords for p in grid.base_points])
    worst = 0.0
    for i in range(J.dim):
        beta = contraction_form(J.action, J.omega, i)
        worst = max(worst, float(np.max(np.linalg.norm(beta.coeffs(Y), axis=1))))
    return worst


@dataclass
class State:
    id: int
    nodes: np.ndarray
    iota: np.ndarray
    truncated: bool
    ambiguous: bool = False


@dataclass(eq=False)
class StateSpace:
    grid: PhaseGrid
    moment: LocalMomentMap
    level: np.ndarray
    eps: float
    states: list
    node_state: np.ndarray        # node -> state id or -1


def _period_offsets(J: LocalMomentMap, W: int):
    els = J.covering.group.window(W)
    return els, np.array([J.periods(d) for d in els])


def compute_state_space(J: LocalMomentMap, grid: PhaseGrid, level, eps: float | None = None
                        ) -> StateSpace:
    """Connected components of {x : J_hat(x) in level + c(D)} on the grid.

    Each state carries iota = level + c(d) for the period offset its cells match.
    """
    vals = moment_on_grid(J, grid)
    level = np.atleast_1d(np.asarray(level, dtype=float))
    if eps is None:
        eps = 2.0 * grid.spacing * moment_gradient_bound(J, grid)
    offs_el, offs = _period_offsets(J, 2 * grid.window + 1)
    resid = vals[:, None, :] - level[None, None, :] - offs[None, :, :]
    dist = np.max(np.abs(resid), axis=2)
    best = np.argmin(dist, axis=1)
    band = dist[np.arange(len(vals)), best] < eps
    n = grid.n_nodes
    e = grid.edges
    keep = band[e[:, 0]] & band[e[:, 1]] if len(e) else np.zeros(0, dtype=bool)
    ee = e[keep]
    A = coo_matrix((np.ones(len(ee)), (ee[:, 0], ee[:, 1])), shape=(n, n))
    _, comp = connected_components(A, directed=False)
    node_state = -np.ones(n, dtype=np.int64)
    states = []
    order = {}
    for node in np.flatnonzero(band):
        cid = comp[node]
        if cid not in order:
            order[cid] = []
        order[cid].append(node)
    # deterministic ids: by smallest offset value, then first node
    groups = []
    for cid, nodes in order.items():
        nodes = np.array(nodes)
        ks = best[nodes]
        vals_k, counts = np.unique(ks, return_counts=True)
        k = int(vals_k[np.argmax(counts)])
        groups.append((tuple(offs[k]), int(nodes.min()), nodes, k, len(vals_k) > 1))
    groups.sort(key=lambda t: (t[0], t[1]))
    for sid, (_, _, nodes, k, amb) in enumerate(groups):
        node_state[nodes] = sid
        states.append(State(sid, nodes, level + offs[k], bool(grid.boundary[nodes].any()), amb))
    return StateSpace(grid, J, level, eps, states, node_state)


@dataclass
class QuotientState:
    id: int
    members: list
    multiplicity: int
    iota: list
    truncated: bool
    fixed: bool


@dataclass
class Quotient:
    classes: list
    state_orbit: dict
    deck_map: dict                 # (state, generator index) -> state or None
    descent_violations: list = field(default_factory=list)


def deck_image(space: StateSpace, sid: int, gamma: GroupElement) -> set:
    """State ids hit by gamma applied to the cells of a state (cells leaving the window skipped)."""
    g = space.grid
    lindex = g._label_index
    nb = g.n_base
    out = set()
    for node in space.states[sid].nodes:
        li, bi = divmod(int(node), nb)
        lj = lindex.get(gamma * g.labels[li])
        if lj is None:
            continue
        out.add(int(space.node_state[lj * nb + bi]))
    return out


def quotient_states(space: StateSpace) -> Quotient:
    G = space.grid.covering.group
    gens = list(G.generators())
    n = len(space.states)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    deck_map, bad = {}, []
    fixed = set()
    for s in range(n):
        for k, gmm in enumerate(gens):
            img = deck_image(space, s, gmm)
            if len(img) > 1 or -1 in img:
                bad.append((s, k, sorted(img)))
                deck_map[(s, k)] = None
                continue
            t = img.pop() if img else None
            deck_map[(s, k)] = t
            if t is None:
                continue
            if t == s:
                fixed.add(s)
            parent[find(s)] = find(t)
    roots = {}
    for s in range(n):
        roots.setdefault(find(s), []).append(s)
    classes, state_orbit = [], {}
    for oid, members in enumerate(sorted(roots.values(), key=min)):
        for s in members:
            state_orbit[s] = oid
        trunc = any(space.states[s].truncated for s in members) or G.kind == "Z"
        classes.append(QuotientState(oid, members, len(members),
                                     [space.states[s].iota.tolist() for s in members],
                                     trunc, any(s in fixed for s in members)))
    return Quotient(classes, state_orbit, deck_map, bad)


def splitting_residual(space: StateSpace, quotient: Quotient) -> float:
    """Within each orbit, iota of gamma.sigma minus iota of sigma must equal c(gamma)."""
    J = space.moment
    gens = list(space.grid.covering.group.generators())
    worst = 0.0
    for (s, k), t in quotient.deck_map.items():
        if t is None:
            continue
        d = space.states[t].iota - space.states[s].iota - J.periods(gens[k])
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


def states_csv(space: StateSpace, quotient: Quotient) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "iota", "orbit", "multiplicity"])
    for st in space.states:
        oid = quotient.state_orbit[st.id]
        iota = ";".join(f"{v:.12g}" for v in st.iota)
        w.writerow([st.id, iota, oid, quotient.classes[oid].multiplicity])
    return buf.getvalue()


def descent_check(space: StateSpace, L: LiftedAction, g: GElement, alpha: np.ndarray,
                  per_state: int = 8) -> tuple[bool, float]:
    """Lifted action maps each interior state into a single state, with
    iota(image) = Ad*(g) iota + alpha(g). Returns (single-state, iota residual)."""
    grid = space.grid
    Ad = L.model.coadjoint(g)
    single, worst = True, 0.0
    for st in space.states:
        if st.truncated:
            continue
        step = max(1, len(st.nodes) // per_state)
        hits = set()
        for node in st.nodes[::step]:
            x = grid.cover_point(node)
            y = L.lift(g, x)
            m = grid.locate(y)
            if m is None:
                continue
            hits.add(int(space.node_state[m]))
        hits.discard(-1)
        if len(hits) > 1:
            single = False
        for t in hits:
            r = space.states[t].iota - Ad @ st.iota - alpha
            worst = max(worst, float(np.max(np.abs(r))))
    return single, worst


# Hamiltonian flows

def hamiltonian_field(h: Expression, omega: TwoForm) -> Callable:
    """V with V -| omega + dh = 0: V = (-d2 h / f, d1 h / f)."""
    d1, d2 = h.derivative(h.variables[0]), h.derivative(h.variables[1])

    def V(y):
        f = omega(y)
        return np.array([-d2.at(y) / f, d1.at(y) / f])
    return V


def rk4(V: Callable, y0, T: float, dt: float) -> np.ndarray:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise StatesError("T must be a positive multiple of dt")
    ys = np.zeros((n + 1, len(y0)))
    ys[0] = y = np.asarray(y0, dtype=float)
    for i in range(n):
        k1 = V(y)
        k2 = V(y + 0.5 * dt * k1)
        k3 = V(y + 0.5 * dt * k2)
        k4 = V(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1] = y
    return ys


@dataclass
class Trajectory:
    times: np.ndarray
    coords: np.ndarray            # continuous chart coordinates of the start chart
    points: list                  # lifted cover points
    truncated: bool = False       # left the label window


def hamiltonian_flow(h: Expression, omega: TwoForm, cov: Covering, start: CoverPoint,
                     T: float = 10.0, dt: float = 0.01, window: int | None = None) -> Trajectory:
    """RK4 trajectory of the Hamiltonian field of h, lifted to the cover from ``start``.

    With a window, the trajectory is cut at the first point whose label leaves it.
    """
    ys = rk4(hamiltonian_field(h, omega), start.y, T, dt)
    t = np.linspace(0.0, T, len(ys))
    path = cov.atlas.subdivide_path(ys, t, closed=False)
    pts = [cov.canonicalize(x) for x in cov.lift_path(path, start)]
    # lift_path returns one point per sample of the subdivided path
    if len(pts) != len(ys):
        raise StatesError("lifted trajectory does not match the samples")
    if window is not None:
        inside = set(cov.group.window(window))
        for i, x in enumerate(pts):
            if x.label not in inside:
                return Trajectory(t[:i], ys[:i], pts[:i], True)
    return Trajectory(t, ys, pts)


def energy_drift(h: Expression, traj: Trajectory) -> float:
    e = np.array([h.at(y) for y in traj.coords])
    return float(np.max(np.abs(e - e[0])))


def moment_drift(J: LocalMomentMap, traj: Trajectory) -> float:
    v = np.array([J.at(x) for x in traj.points])
    return float(np.max(np.abs(v - v[0])))


def poisson_residual(h: Expression, J: LocalMomentMap, omega: TwoForm,
                     points: Sequence[ManifoldPoint]) -> float:
    """max |{h, <J, A_i>}| = |d<J, A_i>(V_h)| at the given points."""
    V = hamiltonian_field(h, omega)
    worst = 0.0
    for p in points:
        v = V(p.y)
        for i in range(J.dim):
            dJ = -contraction_form(J.action, J.omega, i)(p.y)
            worst = max(worst, abs(float(np.dot(dJ, v))))
    return worst


def richardson_order(h: Expression, omega: TwoForm, y0, T: float = 1.0, dt: float = 0.05) -> float:
    """Observed convergence order of RK4 from three step sizes; nan when the
    differences are at round-off level (the integrator is exact for the field)."""
    V = hamiltonian_field(h, omega)
    a = rk4(V, y0, T, dt)[-1]
    b = rk4(V, y0, T, dt / 2)[-1]
    c = rk4(V, y0, T, dt / 4)[-1]
    e1, e2 = np.linalg.norm(a - b), np.linalg.norm(b - c)
    if e2 < 1e-13 * max(1.0, float(np.linalg.norm(c))):
        return math.nan
    return float(math.log2(e1 / e2))
