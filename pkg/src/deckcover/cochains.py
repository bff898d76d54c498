"""Inhomogeneous group cochains and their coboundary.

A cochain of arity n is a function of n group elements. The coefficient
module is described by an action ``act(g, v)`` plus ``add`` and ``neg``.
With side="left" the coboundary is

    (d a)(g1..g_{n+1}) = g1.a(g2..g_{n+1}) + sum_i (-1)^i a(.., g_i g_{i+1}, ..)
                         + (-1)^{n+1} a(g1..g_n)

and with side="right" (pullback actions) it is

    (d a)(g1..g_{n+1}) = g_{n+1}^* a(g1..g_n) + sum_i (-1)^{n+1-i} a(.., g_i g_{i+1}, ..)
                         + (-1)^{n+1} a(g2..g_{n+1})
"""
from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class GroupCochain:
    arity: int
    fn: Callable

    def __call__(self, *gs):
        if len(gs) != self.arity:
            raise TypeError(f"cochain of arity {self.arity} called with {len(gs)} arguments")
        return self.fn(*gs)


def group_delta(alpha: GroupCochain, act: Callable, mul: Callable, side: str = "left",
                add: Callable = operator.add, neg: Callable = operator.neg) -> GroupCochain:
    n = alpha.arity

    def signed(k, v):
        return v if k % 2 == 0 else neg(v)

    def d(*gs):
        terms = []
        if side == "left":
            terms.append(act(gs[0], alpha(*gs[1:])))
            for i in range(n):
                merged = gs[:i] + (mul(gs[i], gs[i + 1]),) + gs[i + 2:]
                terms.append(signed(i + 1, alpha(*merged)))
            terms.append(signed(n + 1, alpha(*gs[:n])))
        elif side == "right":
            terms.append(act(gs[n], alpha(*gs[:n])))
            for i in range(n):
                merged = gs[:i] + (mul(gs[i], gs[i + 1]),) + gs[i + 2:]
                terms.append(signed(n - i, alpha(*merged)))
            terms.append(signed(n + 1, alpha(*gs[1:])))
        else:
            raise ValueError(f"side must be 'left' or 'right', not {side!r}")
        out = terms[0]
        for t in terms[1:]:
            out = add(out, t)
        return out

    return GroupCochain(n + 1, d)
