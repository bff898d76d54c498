"""Command line entry point: ``deckcover <command> ... SCENARIO``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .actions import ActionError, Extension, LiftedAction
from .covering import CoveringError
from .expr import Expression, ExpressionSyntaxError, UnknownIdentifierError
from .forms import FormError, build_multivalued_potential
from .moment import equivariance_cocycle, local_transform_residual
from .scenario import (SCHEMA, ConfigError, Scenario, check_cocycle, check_holonomy,
                       check_moment, check_potential, dumps, g_element, make_report, run_check,
                       run_flow, run_scenario)
from .states import energy_drift, moment_drift

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("scenario", help="scenario JSON file or the name of a shipped scenario")
    p.add_argument("--window", type=int, help="deck label window W")
    p.add_argument("--grid", type=float, help="lattice spacing for state spaces")
    p.add_argument("--tol-quadrature", type=float, dest="tol_quadrature")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deckcover",
                                 description="Coverings, multi-valued potentials and moment maps.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every check of a scenario")
    _common(p)

    cocycle = sub.add_parser("cocycle").add_subparsers(dest="action", required=True)
    _common(cocycle.add_parser("check", help="verify the cocycle conditions"))

    cover = sub.add_parser("cover").add_subparsers(dest="action", required=True)
    _common(cover.add_parser("holonomy", help="deck elements of the generator loops"))
    p = cover.add_parser("lift", help="lift a curve given by expressions in t on [0, 1]")
    _common(p)
    p.add_argument("--curve", action="append", required=True,
                   help="one expression in t per coordinate")
    p.add_argument("--label", default=None, help="deck label of the start point")
    p.add_argument("--samples", type=int, default=200)

    pot = sub.add_parser("potential").add_subparsers(dest="action", required=True)
    p = pot.add_parser("build", help="periods, constants and residuals of the potential")
    _common(p)
    p.add_argument("--form")
    p = pot.add_parser("eval", help="evaluate a branch f_{a,d}(y)")
    _common(p)
    p.add_argument("--form")
    _point_args(p)

    mom = sub.add_parser("moment").add_subparsers(dest="action", required=True)
    _common(mom.add_parser("build", help="periods and residuals of the local moment map"))
    p = mom.add_parser("eval", help="evaluate J_{a,d}(y)")
    _common(p)
    _point_args(p)
    p = mom.add_parser("transform", help="alpha(g) and the local transformation law")
    _common(p)
    p.add_argument("--g", type=float, nargs="*", default=[], help="identity-component parameters")
    p.add_argument("--component", default=None)
    p.add_argument("--samples", type=int, default=10)

    ext = sub.add_parser("extend").add_subparsers(dest="action", required=True)
    p = ext.add_parser("compose", help="compose two elements (deck, component) of the extension")
    _common(p)
    p.add_argument("--u", nargs=2, required=True, metavar=("DECK", "COMPONENT"))
    p.add_argument("--v", nargs=2, required=True, metavar=("DECK", "COMPONENT"))
    _common(ext.add_parser("table", help="Gamma, b and the extension law checks"))

    st = sub.add_parser("states").add_subparsers(dest="action", required=True)
    p = st.add_parser("split", help="state space of a level set and its deck quotient")
    _common(p)
    p.add_argument("--level", type=float, nargs="+", required=True)
    p.add_argument("--csv", help="write the state table here")
    p = st.add_parser("flow", help="Hamiltonian flow and moment invariance")
    _common(p)
    p.add_argument("--h", required=True, help="Hamiltonian expression")
    p.add_argument("--start", nargs="+", required=True, metavar="VALUE",
                   help="chart label y1 y2")
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--csv", help="write the trajectory here")
    return ap


def _point_args(p):
    p.add_argument("--chart", type=int, default=0)
    p.add_argument("--label", default=None)
    p.add_argument("--at", type=float, nargs="+", required=True)


def parse_label(G, text):
    """'1' or '1,-2' for Z^k; an index or element name for finite groups."""
    if text is None:
        return G.identity()
    if G.kind == "Z":
        return G.element(tuple(int(v) for v in text.split(",")))
    if G.kind == "table" and text in G.names:
        return G.element(G.names.index(text))
    return G.element(int(text))


def _report(sc: Scenario, command: str, result: dict) -> dict:
    rep = make_report(sc, [result])
    rep["command"] = command
    return rep


def _component(L: LiftedAction, text):
    comps = L.model.components
    if text is None:
        return None
    if comps.kind == "table" and text in comps.names:
        return comps.names.index(text)
    return int(text)


def dispatch(args) -> dict:
    sc = Scenario.load(args.scenario)
    sc.overrides = {"window": args.window, "grid": args.grid, "seed": args.seed,
                    "tol_quadrature": args.tol_quadrature}
    cmd = args.command if args.command == "run" else f"{args.command} {args.action}"
    if cmd == "run":
        rep = run_scenario(sc)
        rep["command"] = "run"
        return rep
    G = sc.covering.group
    if cmd == "cocycle check":
        res = {"kind": "cocycle", **check_cocycle(sc, {})}
    elif cmd == "cover holonomy":
        res = {"kind": "holonomy", **check_holonomy(sc, {})}
    elif cmd == "cover lift":
        res = _cover_lift(sc, args)
    elif cmd == "potential build":
        res = {"kind": "potential", **check_potential(sc, {"form": args.form} if args.form else {})}
    elif cmd == "potential eval":
        P = build_multivalued_potential(sc.form(args.form), sc.covering)
        d = parse_label(G, args.label)
        res = {"kind": "potential_eval", "pass": True, "chart": args.chart, "label": d.to_json(),
               "value": P(args.chart, d, np.array(args.at))}
    elif cmd == "moment build":
        res = {"kind": "moment", **check_moment(sc, {})}
    elif cmd == "moment eval":
        d = parse_label(G, args.label)
        res = {"kind": "moment_eval", "pass": True, "chart": args.chart, "label": d.to_json(),
               "value": sc.moment(args.chart, d, np.array(args.at)).tolist()}
    elif cmd == "moment transform":
        res = _moment_transform(sc, args)
    elif cmd == "extend compose":
        L = sc.lifted()
        ext = Extension(L)
        u = ext.element(parse_label(G, args.u[0]),
                        L.model.element((), _component(L, args.u[1])))
        v = ext.element(parse_label(G, args.v[0]),
                        L.model.element((), _component(L, args.v[1])))
        w = ext.compose(u, v)
        res = {"kind": "extend_compose", "pass": True, "u": u.to_json(), "v": v.to_json(),
               "product": w.to_json()}
    elif cmd == "extend table":
        res = run_check(sc, {"kind": "extension"})
    elif cmd == "states split":
        level = args.level[0] if len(args.level) == 1 else args.level
        res = run_check(sc, {"kind": "splitting", "level": level})
        if args.csv:
            Path(args.csv).write_text(res["csv"], encoding="utf-8")
    elif cmd == "states flow":
        res = _states_flow(sc, args)
    else:  # pragma: no cover - argparse restricts the choices
        raise ConfigError(f"unknown command {cmd}")
    return _report(sc, cmd, res)


def _cover_lift(sc: Scenario, args) -> dict:
    cov = sc.covering
    at = sc.atlas
    if len(args.curve) != at.dim:
        raise ConfigError(f"need {at.dim} --curve expressions")
    exprs = [Expression.bind(c, ["t"]) for c in args.curve]
    t = np.linspace(0.0, 1.0, args.samples)
    samples = np.stack([np.broadcast_to(e(t), t.shape) for e in exprs], axis=1)
    path = at.subdivide_path(samples, t)
    start = at.canonical(samples[0])
    x0 = cov.point(start.chart, parse_label(cov.group, args.label), start.coords)
    end = cov.canonicalize(cov.lift_endpoint(path, x0))
    out = {"kind": "cover_lift", "pass": True, "start": x0.to_json(), "end": end.to_json(),
           "charts": path.chart_sequence(), "closed": path.closed}
    if path.closed:
        out["deck_element"] = cov.loop_deck_element(path, x0).to_json()
    return out


def _moment_transform(sc: Scenario, args) -> dict:
    J, L = sc.moment, sc.lifted()
    g = g_element(L.model, {"params": args.g, "component": _component(L, args.component)})
    rng = np.random.default_rng(sc.seed)
    pts = sc.covering.sample_points(rng, args.samples, 2)
    eq = equivariance_cocycle(J, L, g, pts)
    law = local_transform_residual(J, L, g, pts)
    ok = eq.spread < 1e-8 and law.residual < 1e-8
    return {"kind": "moment_transform", "pass": ok, "g": g.to_json(), "alpha": eq.alpha.tolist(),
            "alpha_spread": eq.spread, "local_law": law.residual,
            "psi": [p.to_json() for p in law.psi]}


def _states_flow(sc: Scenario, args) -> dict:
    if len(args.start) != 2 + sc.atlas.dim:
        raise ConfigError("--start takes chart, label and the coordinates")
    G = sc.covering.group
    label = parse_label(G, args.start[1]).value
    start = [int(args.start[0]), list(label) if isinstance(label, tuple) else label,
             [float(v) for v in args.start[2:]]]
    h, traj = run_flow(sc, args.h, start, args.T, args.dt)
    J = sc.moment
    drift = moment_drift(J, traj)
    if args.csv:
        lines = ["t," + ",".join(sc.atlas.coord_names) + ",chart,label,J"]
        for t, x in zip(traj.times, traj.points):
            lab = ";".join(str(v) for v in np.atleast_1d(x.label.value))
            jv = ";".join(f"{v:.12g}" for v in J.at(x))
            lines.append(f"{t:.6g}," + ",".join(f"{v:.12g}" for v in x.y)
                         + f",{x.chart},{lab},{jv}")
        Path(args.csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"kind": "flow", "pass": drift < 1e-6, "moment_drift": drift,
            "energy_drift": energy_drift(h, traj), "end": traj.points[-1].to_json(),
            "steps": len(traj.points) - 1}


USAGE_ERRORS = (ConfigError, ExpressionSyntaxError, UnknownIdentifierError, KeyError)
MODULE_ERRORS = (CoveringError, FormError, ActionError, ValueError, ArithmeticError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = dispatch(args)
    except USAGE_ERRORS as exc:
        _error(exc, "usage")
        return EXIT_USAGE
    except MODULE_ERRORS as exc:
        _error(exc, "module")
        return EXIT_FAIL
    text = dumps(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def _error(exc: Exception, category: str):
    doc = {"schema": SCHEMA, "error": {"category": category, "type": type(exc).__name__,
                                       "message": str(exc)}}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
