import copy
import json

import numpy as np
import pytest

from sheafcontrol.errors import ParseError
from sheafcontrol.netmodel import validate
from sheafcontrol.problemfile import load, loads, parse
from sheafcontrol.problems import bundled_path


@pytest.fixture
def idle_data():
    return json.loads(bundled_path("idle").read_text())


def test_round_trip_through_text(idle_data):
    lp = loads(json.dumps(idle_data))
    assert tuple(lp.problem.vertices) == ("a", "b")
    assert lp.problem.horizon == 2
    assert lp.is_affine and lp.violations == []


def test_load_from_path(tmp_path, idle_data):
    f = tmp_path / "p.json"
    f.write_text(json.dumps(idle_data))
    assert load(f).problem.name == "idle"
    with pytest.raises(ParseError):
        load(tmp_path / "missing.json")


def test_nominal_controls_default_to_listed_values(idle_data):
    lp = parse(idle_data)
    assert lp.nominal.controls("a") == (0.0, 1.0)
    data = copy.deepcopy(idle_data)
    data["nominal"]["a"].update(c0=1, c1=0)
    assert parse(data).nominal.controls("a") == (1.0, 0.0)


def test_nominal_needs_two_controls(idle_data):
    data = copy.deepcopy(idle_data)
    data["vertex_models"]["a"]["controls"] = [0, 1, 2]
    with pytest.raises(ParseError, match="c0/c1"):
        parse(data)


def test_affine_dynamics_from_weights(idle_data):
    lp = parse(idle_data)
    assert np.array_equal(lp.dynamics.A, [[1.0, 0.0], [1.0, 0.0]])
    f = lp.problem.f["b"]
    # tuple of b is (c_b, s_b, s_a)
    assert f(np.array([0.0, 0.0, 1.0]))[0] == 1.0


def test_saturating_dynamics(idle_data):
    data = copy.deepcopy(idle_data)
    data["vertex_models"]["a"]["dynamics"] = {"form": "saturating-affine", "A": {"a": 2.0}, "lo": 0, "hi": 1}
    lp = parse(data)
    assert not lp.is_affine and lp.clamp == {"a": (0.0, 1.0)}
    assert lp.problem.f["a"](np.array([0.0, 1.0]))[0] == 1.0


def test_sparsity_violation_is_recorded(idle_data):
    data = copy.deepcopy(idle_data)
    data["edges"] = [["a", "a"], ["b", "b"]]
    lp = parse(data)
    assert [(v.kind, v.vertex) for v in lp.violations] == [("sparsity", "b")]


def test_missing_self_edge_parses_but_fails_validation(idle_data):
    data = copy.deepcopy(idle_data)
    data["edges"] = [["a", "a"], ["a", "b"]]
    kinds = {(v.kind, v.vertex) for v in validate(parse(data).problem)}
    assert ("self-edge", "b") in kinds


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.update(vertices=[]), "vertices"),
    (lambda d: d.update(vertices=["a", "a"]), "duplicate"),
    (lambda d: d["edges"].append(["a", "z"]), "unknown vertex"),
    (lambda d: d.update(horizon=0), "horizon"),
    (lambda d: d["vertex_models"]["a"]["dynamics"].update(form="cubic"), "dynamics form"),
    (lambda d: d["vertex_models"]["a"].update(objective_state={"form": "square"}), "objective form"),
    (lambda d: d["vertex_models"]["a"].update(objective_state={"form": "abs", "target": 0, "weight": -1}),
     "weight"),
    (lambda d: d["vertex_models"]["a"].pop("states"), "states"),
    (lambda d: d["vertex_models"]["a"]["dynamics"].update(B="x"), "number"),
    (lambda d: d.update(initial_state={"a": 0}), "initial_state"),
    (lambda d: d["nominal"]["a"].update(eta=5), "s_phi < eta"),
    (lambda d: d.update(solver={"mode": "greedy"}), "solver mode"),
    (lambda d: d.update(solver={"speed": 3}), "solver block"),
])
def test_parse_errors(idle_data, mutate, message):
    data = copy.deepcopy(idle_data)
    mutate(data)
    with pytest.raises(ParseError, match=message):
        parse(data)


def test_invalid_json():
    with pytest.raises(ParseError, match="invalid JSON"):
        loads("{")
    with pytest.raises(ParseError):
        loads("[1, 2]")


def test_bundled_problems_validate(bundled):
    for lp in bundled.values():
        assert lp.violations == []
        assert validate(lp.problem) == []
