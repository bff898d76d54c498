"""Box atlases for the built-in manifolds, chart paths and path subdivision.

Every chart is an open coordinate box. Periodic axes have period 2*pi and
transition maps are translations by multiples of the period, so a point is
described either by (chart, local coordinates) or by "global" coordinates in
R^n read modulo the periods.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import tolerances as tol

TWO_PI = 2.0 * math.pi


class AtlasError(ValueError):
    pass


class PathResolutionError(AtlasError):
    """Consecutive samples share no chart; the path needs finer sampling."""


@dataclass(frozen=True)
class Chart:
    index: int
    lower: tuple
    upper: tuple

    def contains(self, y) -> bool:
        return all(lo < v < hi for lo, v, hi in zip(self.lower, y, self.upper))

    @property
    def center(self) -> np.ndarray:
        out = []
        for lo, hi in zip(self.lower, self.upper):
            if math.isinf(lo) and math.isinf(hi):
                out.append(0.0)
            elif math.isinf(lo):
                out.append(hi - 1.0)
            elif math.isinf(hi):
                out.append(lo + 1.0)
            else:
                out.append(0.5 * (lo + hi))
        return np.array(out)


@dataclass(frozen=True)
class ManifoldPoint:
    chart: int
    coords: tuple

    @staticmethod
    def make(chart: int, coords) -> "ManifoldPoint":
        return ManifoldPoint(int(chart), tuple(float(c) for c in np.atleast_1d(coords)))

    @property
    def y(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)


@dataclass
class Segment:
    chart: int
    t: np.ndarray
    coords: np.ndarray          # (m, dim) local coordinates in ``chart``


@dataclass
class ChartPath:
    atlas: "Atlas"
    segments: list
    closed: bool = False

    @property
    def charts(self) -> list[int]:
        return [s.chart for s in self.segments]

    def chart_sequence(self) -> list[int]:
        """Charts visited, closed up with the starting chart for loops."""
        seq = self.charts
        return seq + [seq[0]] if self.closed else seq

    @property
    def start(self) -> ManifoldPoint:
        s = self.segments[0]
        return ManifoldPoint.make(s.chart, s.coords[0])

    @property
    def end(self) -> ManifoldPoint:
        s = self.segments[-1]
        return ManifoldPoint.make(s.chart, s.coords[-1])

    @property
    def n_samples(self) -> int:
        return sum(len(s.t) for s in self.segments) - (len(self.segments) - 1)


@dataclass(eq=False)
class Atlas:
    name: str
    dim: int
    periods: tuple
    charts: tuple
    base: ManifoldPoint
    coord_names: tuple
    generator_curves: tuple = ()
    _overlaps: dict = field(default=None, repr=False)

    def __post_init__(self):
        self._overlaps = self._compute_overlaps()
        self._nonempty = lru_cache(maxsize=None)(self._nonempty_sorted)

    # chart geometry
    def shift_into(self, b: int, g) -> np.ndarray | None:
        """Shift s (multiples of the periods) with g + s inside chart b, or None."""
        ch = self.charts[b]
        s = np.zeros(self.dim)
        for i in range(self.dim):
            lo, hi, P = ch.lower[i], ch.upper[i], self.periods[i]
            v = g[i]
            if P is None:
                if not lo < v < hi:
                    return None
                continue
            k = math.ceil((hi - v) / P) - 1
            if not lo < v + k * P < hi:
                return None
            s[i] = k * P
        return s

    def charts_containing(self, g) -> list[tuple[int, np.ndarray]]:
        out = []
        for b in range(len(self.charts)):
            s = self.shift_into(b, g)
            if s is not None:
                out.append((b, np.asarray(g, dtype=float) + s))
        return out

    def canonical(self, g) -> ManifoldPoint:
        """Canonical representative of a global coordinate: lowest chart index."""
        g = np.atleast_1d(np.asarray(g, dtype=float))
        for b in range(len(self.charts)):
            s = self.shift_into(b, g)
            if s is not None:
                return ManifoldPoint.make(b, g + s)
        raise AtlasError(f"point {g} lies in no chart")

    def canonicalize(self, pt: ManifoldPoint) -> ManifoldPoint:
        if not self.charts[pt.chart].contains(pt.coords):
            raise AtlasError(f"{pt} is outside its chart box")
        return self.canonical(pt.y)

    def transition(self, a: int, b: int, y) -> np.ndarray:
        """T_ab: chart-a coordinates to chart-b coordinates."""
        y = np.asarray(y, dtype=float)
        if a == b:
            return y.copy()
        s = self.shift_into(b, y)
        if s is None:
            raise AtlasError(f"point {y} of chart {a} is not in chart {b}")
        return y + s

    def _axis_overlap(self, i, intervals, lo, hi):
        P = self.periods[i]
        shifts = [0.0] if P is None else [k * P for k in (-2, -1, 0, 1, 2)]
        out = []
        for (l0, h0) in intervals:
            for s in shifts:
                l1, h1 = max(l0, lo + s), min(h0, hi + s)
                if l1 < h1:
                    out.append((l1, h1))
        return out

    def _compute_overlaps(self) -> dict:
        out = {}
        n = len(self.charts)
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                A, B = self.charts[a], self.charts[b]
                shift, ok = np.zeros(self.dim), True
                for i in range(self.dim):
                    pieces = []
                    P = self.periods[i]
                    ks = [0] if P is None else (-2, -1, 0, 1, 2)
                    for k in ks:
                        s = 0.0 if P is None else k * P
                        l1 = max(A.lower[i], B.lower[i] - s)
                        h1 = min(A.upper[i], B.upper[i] - s)
                        if l1 < h1:
                            pieces.append(s)
                    if not pieces:
                        ok = False
                        break
                    if len(pieces) > 1:
                        raise AtlasError(f"overlap of charts {a},{b} is disconnected")
                    shift[i] = pieces[0]
                if ok:
                    out[(a, b)] = shift
        return out

    @property
    def overlaps(self) -> dict:
        """Ordered pairs (a, b), a != b, with nonempty overlap -> shift of T_ab."""
        return self._overlaps

    def neighbours(self, a: int) -> list[int]:
        return sorted(b for (x, b) in self._overlaps if x == a)

    def nonempty(self, indices: Sequence[int]) -> bool:
        """Whether V_{a0} n ... n V_{ak} is nonempty (repeats allowed)."""
        return self._nonempty(tuple(sorted(set(indices))))

    def _nonempty_sorted(self, idx: tuple) -> bool:
        if len(idx) == 1:
            return True
        if len(idx) == 2:
            return idx in self._overlaps
        for i in range(self.dim):
            first = self.charts[idx[0]]
            iv = [(first.lower[i], first.upper[i])]
            for b in idx[1:]:
                ch = self.charts[b]
                iv = self._axis_overlap(i, iv, ch.lower[i], ch.upper[i])
                if not iv:
                    return False
        return True

    def overlap_point(self, a: int, b: int) -> np.ndarray:
        """A point of V_a n V_b in chart-a coordinates (centre of the overlap box)."""
        if a == b:
            return self.charts[a].center
        s = self._overlaps[(a, b)]
        A, B = self.charts[a], self.charts[b]
        lo = [max(A.lower[i], B.lower[i] - s[i]) for i in range(self.dim)]
        hi = [min(A.upper[i], B.upper[i] - s[i]) for i in range(self.dim)]
        return Chart(-1, tuple(lo), tuple(hi)).center

    def sample_points(self, rng: np.random.Generator, n: int, chart: int | None = None,
                      unbounded: float = 3.0) -> list[ManifoldPoint]:
        out = []
        for _ in range(n):
            a = int(rng.integers(len(self.charts))) if chart is None else chart
            ch = self.charts[a]
            y = []
            for lo, hi in zip(ch.lower, ch.upper):
                lo2 = -unbounded if math.isinf(lo) else lo
                hi2 = unbounded if math.isinf(hi) else hi
                w = hi2 - lo2
                y.append(rng.uniform(lo2 + 0.02 * w, hi2 - 0.02 * w))
            out.append(ManifoldPoint.make(a, y))
        return out

    def validate(self, grid: int = 41) -> list[str]:
        """Check cover property on a grid and inverse transitions; returns problems."""
        problems = []
        axes = []
        for i in range(self.dim):
            P = self.periods[i]
            if P is not None:
                axes.append(np.linspace(0.0, P, grid, endpoint=False))
            else:
                ch = self.charts[0]
                lo = -3.0 if math.isinf(ch.lower[i]) else ch.lower[i] + 1e-6
                hi = 3.0 if math.isinf(ch.upper[i]) else ch.upper[i] - 1e-6
                axes.append(np.linspace(lo, hi, grid))
        for g in np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, self.dim):
            if not self.charts_containing(g):
                problems.append(f"uncovered point {g}")
        for (a, b), s in self._overlaps.items():
            if not np.allclose(self._overlaps[(b, a)], -s):
                problems.append(f"transition {a}->{b} not inverse to {b}->{a}")
        return problems

    # paths
    def subdivide_path(self, samples, t=None, closed: bool | None = None) -> ChartPath:
        """Split a sampled curve (global coordinates) into single-chart segments.

        A segment keeps its chart while samples stay inside; at a breakpoint the
        lowest-index chart containing both neighbouring samples is chosen.
        """
        g = np.asarray(samples, dtype=float)
        if g.ndim == 1:
            g = g[:, None] if self.dim == 1 else g[None, :]
        N = len(g)
        if t is None:
            t = np.linspace(0.0, 1.0, N) if N > 1 else np.zeros(1)
        t = np.asarray(t, dtype=float)
        a, s = None, None
        for b in range(len(self.charts)):
            s = self.shift_into(b, g[0])
            if s is not None:
                a = b
                break
        if a is None:
            raise AtlasError(f"path start {g[0]} lies in no chart")
        segments = []
        start = 0
        for k in range(1, N):
            if self.charts[a].contains(g[k] + s):
                continue
            for b in range(len(self.charts)):
                sb = self.shift_into(b, g[k - 1])
                if sb is not None and self.charts[b].contains(g[k] + sb):
                    break
            else:
                raise PathResolutionError(
                    f"samples {k - 1},{k} share no chart; refine the path")
            segments.append(Segment(a, t[start:k], g[start:k] + s))
            a, s, start = b, sb, k - 1
        segments.append(Segment(a, t[start:], g[start:] + s))
        path = ChartPath(self, segments, False)
        if closed is None:
            closed = N > 1 and self.same_point(g[0], g[-1])
        path.closed = bool(closed)
        return path

    def same_point(self, g1, g2, eps: float = tol.GEOMETRY) -> bool:
        d = np.asarray(g1, dtype=float) - np.asarray(g2, dtype=float)
        for i, P in enumerate(self.periods):
            if P is not None:
                d[i] = (d[i] + P / 2) % P - P / 2
        return bool(np.max(np.abs(d)) < eps)

    def path_from_curve(self, curve: Callable, n: int = tol.SAMPLES,
                        closed: bool | None = None) -> ChartPath:
        t = np.linspace(0.0, 1.0, n)
        pts = np.array([np.atleast_1d(curve(x)) for x in t], dtype=float)
        return self.subdivide_path(pts, t, closed)

    def generator_path(self, i: int, n: int = tol.SAMPLES) -> ChartPath:
        return self.path_from_curve(self.generator_curves[i], n, closed=True)

    @property
    def n_generators(self) -> int:
        return len(self.generator_curves)

    def max_step(self) -> float:
        """Largest coordinate step that keeps consecutive samples in a common chart."""
        widths = []
        for (a, b) in self._overlaps:
            s = self._overlaps[(a, b)]
            A, B = self.charts[a], self.charts[b]
            for i in range(self.dim):
                w = min(A.upper[i], B.upper[i] - s[i]) - max(A.lower[i], B.lower[i] - s[i])
                widths.append(w)
        finite = [w for w in widths if math.isfinite(w)]
        return 0.25 * min(finite) if finite else 1.0

    def segment_samples(self, g0, g1, minimum: int = tol.SAMPLES) -> int:
        d = float(np.max(np.abs(np.asarray(g1, float) - np.asarray(g0, float))))
        return max(minimum, int(math.ceil(d / self.max_step())) + 1)


def _arcs(n: int, padding: float, offset: float) -> list[tuple[float, float]]:
    if n < 3:
        raise AtlasError("need at least 3 arcs on a periodic axis")
    if not 0 < padding < TWO_PI / n:
        raise AtlasError("padding must lie in (0, 2*pi/n)")
    return [(offset + TWO_PI * i / n, offset + TWO_PI * (i + 1) / n + padding)
            for i in range(n)]


def builtin_atlas(name: str, charts: int = 3, padding: float | None = None,
                  offset: float | None = None, radii: tuple = (1.0, 2.0)) -> Atlas:
    """Atlas for circle, cylinder, torus, annulus or plane.

    Periodic axes get ``charts`` arcs of width 2*pi/charts + padding. The default
    offset of -padding/2 puts the base point theta = 0 inside chart 0.
    """
    pad = TWO_PI / 12 if padding is None else padding
    off = -pad / 2 if offset is None else offset
    inf = math.inf
    if name == "plane":
        ch = (Chart(0, (-inf, -inf), (inf, inf)),)
        return Atlas("plane", 2, (None, None), ch, ManifoldPoint.make(0, (0.0, 0.0)), ("x", "y"))
    arcs = _arcs(charts, pad, off)
    if name == "circle":
        ch = tuple(Chart(i, (lo,), (hi,)) for i, (lo, hi) in enumerate(arcs))
        gens = (lambda t: np.array([TWO_PI * t]),)
        at = Atlas("circle", 1, (TWO_PI,), ch, ManifoldPoint.make(0, (0.0,)), ("theta",), gens)
    elif name == "cylinder":
        ch = tuple(Chart(i, (lo, -inf), (hi, inf)) for i, (lo, hi) in enumerate(arcs))
        gens = (lambda t: np.array([TWO_PI * t, 0.0]),)
        at = Atlas("cylinder", 2, (TWO_PI, None), ch, ManifoldPoint.make(0, (0.0, 0.0)),
                   ("theta", "p"), gens)
    elif name == "annulus":
        r0, r1 = radii
        mid = 0.5 * (r0 + r1)
        ch = tuple(Chart(i, (lo, r0), (hi, r1)) for i, (lo, hi) in enumerate(arcs))
        gens = (lambda t: np.array([TWO_PI * t, mid]),)
        at = Atlas("annulus", 2, (TWO_PI, None), ch, ManifoldPoint.make(0, (0.0, mid)),
                   ("theta", "r"), gens)
    elif name == "torus":
        ch = tuple(Chart(i * charts + j, (a[0], b[0]), (a[1], b[1]))
                   for i, a in enumerate(arcs) for j, b in enumerate(arcs))
        gens = (lambda t: np.array([TWO_PI * t, 0.0]), lambda t: np.array([0.0, TWO_PI * t]))
        at = Atlas("torus", 2, (TWO_PI, TWO_PI), ch, ManifoldPoint.make(0, (0.0, 0.0)),
                   ("theta1", "theta2"), gens)
    else:
        raise AtlasError(f"unknown manifold {name!r}")
    return at


def product_loop_homotopy(lam: Callable, mu: Callable, s: float, t: float) -> np.ndarray:
    """Homotopy from (lam, mu) to the concatenation of {x} x mu and lam x {y}.

    ``lam`` and ``mu`` are loops on [0, 1] based at x and y.
    """
    x = np.atleast_1d(lam(0.0))
    y = np.atleast_1d(mu(0.0))
    w = 1.0 - s / 2.0
    if t < s / 2.0:
        return np.concatenate([x, np.atleast_1d(mu(t / w))])
    if t < 1.0 - s / 2.0:
        return np.concatenate([np.atleast_1d(lam((t - s / 2.0) / w)), np.atleast_1d(mu(t / w))])
    return np.concatenate([np.atleast_1d(lam((t - s / 2.0) / w)), y])
