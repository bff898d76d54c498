import json
import math

import pytest

from deckcover.cli import main
from deckcover.scenario import SCENARIO_DIR, ConfigError, Scenario, validate


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _strip(doc):
    doc = dict(doc)
    doc.pop("timestamp")
    return doc


@pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_pass(path, capsys):
    code, out, _ = run(capsys, "run", str(path))
    rep = json.loads(out)
    failed = [c["kind"] for c in rep["checks"] if not c["pass"]]
    assert code == 0 and rep["pass"], failed
    assert rep["schema"] == 1 and rep["scenario"] == path.stem


def test_reports_are_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "run", "circle_periods", "--seed", "7", "--out", str(a))[0] == 0
    assert run(capsys, "run", "circle_periods", "--seed", "7", "--out", str(b))[0] == 0
    assert _strip(json.loads(a.read_text())) == _strip(json.loads(b.read_text()))
    assert json.loads(a.read_text())["seed"] == 7


def test_cover_lift_reports_deck_element(capsys):
    code, out, _ = run(capsys, "cover", "lift", "circle_periods", "--curve", "4*pi*t")
    rep = json.loads(out)["checks"][0]
    assert code == 0 and rep["deck_element"] == [2] and rep["closed"]


def test_potential_and_moment_eval(capsys):
    code, out, _ = run(capsys, "potential", "eval", "circle_periods", "--label", "2",
                       "--at", "1.0")
    val = json.loads(out)["checks"][0]["value"]
    assert code == 0
    # f = unwrapped angle minus the base value
    sc = Scenario.load("circle_periods")
    cov = sc.covering
    x = cov.point(0, 2, [1.0])
    assert math.isclose(val, cov.unwrap(x)[0] - cov.unwrap(cov.base)[0], abs_tol=1e-10)
    code, out, _ = run(capsys, "moment", "eval", "cylinder_boost", "--label", "1",
                       "--at", "1.0", "0.3")
    assert code == 0 and len(json.loads(out)["checks"][0]["value"]) == 1


def test_extend_compose(capsys):
    code, out, _ = run(capsys, "extend", "compose", "circle_halfturn_extension",
                       "--u", "0", "sigma", "--v", "0", "sigma")
    prod = json.loads(out)["checks"][0]["product"]
    assert code == 0 and prod["deck"] == [1] and prod["g"]["component"] == "e"


def test_moment_transform_and_split(capsys, tmp_path):
    code, out, _ = run(capsys, "moment", "transform", "cylinder_euclid", "--g", "0.3", "-1")
    assert code == 0 and json.loads(out)["checks"][0]["local_law"] < 1e-8
    csv = tmp_path / "states.csv"
    code, out, _ = run(capsys, "states", "split", "cylinder_boost", "--level", "0",
                       "--window", "2", "--csv", str(csv))
    assert code == 0
    assert csv.read_text().splitlines()[0] == "id,iota,orbit,multiplicity"
    assert len(csv.read_text().splitlines()) == 6


def test_states_flow(capsys, tmp_path):
    csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "states", "flow", "cylinder_boost", "--h", "cos(theta)",
                       "--start", "0", "0", "1.0", "0.0", "--T", "1", "--csv", str(csv))
    assert code == 0 and json.loads(out)["checks"][0]["moment_drift"] < 1e-6
    assert len(csv.read_text().splitlines()) == 102


@pytest.mark.parametrize("argv", [["run", "no_such_scenario"],
                                  ["potential", "build", "circle_periods", "--form", "zeta"],
                                  ["states", "flow", "cylinder_boost", "--h", "q^2",
                                   "--start", "0", "0", "1", "0"],
                                  ["states", "flow", "cylinder_boost", "--h", "p^",
                                   "--start", "0", "0", "1", "0"],
                                  ["moment", "build", "circle_periods"]])
def test_usage_errors_exit_two(argv, capsys):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == ""
    assert json.loads(err)["error"]["category"] == "usage"


def test_unknown_command_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_failing_check_exits_one(capsys, tmp_path):
    doc = json.loads((SCENARIO_DIR / "circle_periods.json").read_text())
    doc["checks"] = [{"kind": "periods", "expect": [6.0]}]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "run", str(p))
    assert code == 1 and not json.loads(out)["pass"]


def test_empty_check_list_passes(capsys, tmp_path):
    doc = json.loads((SCENARIO_DIR / "circle_periods.json").read_text())
    doc["checks"] = []
    p = tmp_path / "empty.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "run", str(p))
    assert code == 0 and json.loads(out)["checks"] == []


@pytest.mark.parametrize("mutate", [lambda d: d.update(schema=2), lambda d: d.update(extra=1),
                                    lambda d: d.pop("manifold"),
                                    lambda d: d.update(tolerances={"bogus": 1}),
                                    lambda d: d["checks"].append({"kind": "nope"})])
def test_strict_schema(mutate):
    doc = json.loads((SCENARIO_DIR / "circle_periods.json").read_text())
    mutate(doc)
    with pytest.raises(ConfigError):
        validate(doc)
