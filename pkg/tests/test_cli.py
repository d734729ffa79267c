import json
import subprocess
import sys

import pytest

from sheafcontrol.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, EXIT_PARSE, main
from sheafcontrol.problems import bundled_path


def idle_data():
    return json.loads(bundled_path("idle").read_text())


def write(tmp_path, data, name="p.json"):
    f = tmp_path / name
    f.write_text(json.dumps(data))
    return str(f)


def run_json(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*argv, "--output", str(out)])
    return code, json.loads(out.read_text())


def test_validate_bundled(capsys):
    assert main(["validate", "bundled:lighting"]) == EXIT_OK
    assert "valid" in capsys.readouterr().out


def test_missing_self_edge_names_vertex(tmp_path, capsys):
    data = idle_data()
    data["edges"] = [["a", "a"], ["a", "b"]]
    assert main(["validate", write(tmp_path, data)]) == EXIT_INVALID
    out = capsys.readouterr().out
    assert "self-edge" in out and "b" in out


def test_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["validate", str(bad)]) == EXIT_PARSE
    assert "invalid JSON" in capsys.readouterr().err
    assert main(["solve", "bundled:nothing"]) == EXIT_PARSE


def test_zero_objective_solves_to_zero(tmp_path):
    code, rep = run_json(tmp_path, "solve", "bundled:idle")
    assert code == EXIT_OK
    assert rep["solve"]["constrained"]["objective"] == 0.0


def test_both_modes_report_gap(tmp_path):
    code, rep = run_json(tmp_path, "solve", "bundled:lighting", "--mode", "both")
    assert code == EXIT_OK
    sol = rep["solve"]
    assert sol["constrained"]["objective"] == 1.5
    assert sol["relaxed"]["objective"] <= sol["constrained"]["objective"]
    assert sol["gap_passed"] and all(r["section_ok"] and r["distance_ok"] for r in sol["gap"])


def test_boolify_affine_has_no_error(tmp_path):
    code, rep = run_json(tmp_path, "boolify", "bundled:lighting")
    assert code == EXIT_OK
    b = rep["boolify"]
    assert b["budget"]["eps"] == 0.0 and b["eps_zero"]
    assert all(t["lhs_le_mid"] and t["mid_le_rhs"] for t in b["triples"])


def test_boolify_saturating_has_error(tmp_path):
    code, rep = run_json(tmp_path, "boolify", "bundled:ups")
    assert code == EXIT_OK
    b = rep["boolify"]
    assert b["budget"]["eps"] > 0.0
    assert b["budget"]["evaluation_mode"] == "exhaustive"
    assert all(t["lhs_le_mid"] and t["mid_le_rhs"] for t in b["triples"])


def test_boolify_needs_nominal_block(tmp_path, capsys):
    data = idle_data()
    del data["nominal"]
    assert main(["boolify", write(tmp_path, data)]) == EXIT_INVALID
    assert "no nominal block" in capsys.readouterr().out


def test_budget_exhaustion_exit_code():
    assert main(["solve", "bundled:ups", "--mode", "relaxed", "--budget", "5"]) == EXIT_BUDGET


def test_report_verify(tmp_path):
    code, rep = run_json(tmp_path, "report", "bundled:lighting", "--verify")
    assert code == EXIT_OK
    assert rep["verify"] == {"passed": True, "failures": []}
    assert {"validation", "solve", "boolify"} <= set(rep)


@pytest.mark.parametrize("threads", ["1", "3"])
def test_output_independent_of_threads(tmp_path, threads):
    _, base = run_json(tmp_path, "report", "bundled:ups", "--seed", "2")
    _, other = run_json(tmp_path, "report", "bundled:ups", "--seed", "2", "--threads", threads)
    assert other["solve"]["settings"].pop("threads") == int(threads)
    base["solve"]["settings"].pop("threads")
    assert base == other


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "sheafcontrol", "validate", "bundled:idle"],
                          capture_output=True, text=True)
    assert done.returncode == 0
    assert "idle" in done.stdout
