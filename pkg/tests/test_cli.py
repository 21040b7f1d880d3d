import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from finsler_means.cli import run

EUCLID = {"kind": "flat", "norm": {"kind": "euclidean", "metric": [[1, 0], [0, 1]]}}
THIRD = 1.0 / 3.0
THREE_ATOMS = {"atoms": [{"point": [0, 0], "weight": THIRD}, {"point": [2, 0], "weight": THIRD},
                         {"point": [0, 2], "weight": 1.0 - 2 * THIRD}]}


def write(tmp_path, data, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def mean_problem(tmp_path):
    return write(tmp_path, {"manifold": EUCLID, "measure": THREE_ATOMS,
                            "solver": {"algorithm": "mean-descent", "p": 2, "x0": [1.5, 1.0]}})


def test_mean(mean_problem):
    code, out, _ = call(["mean", mean_problem])
    assert code == 0
    res = json.loads(out)
    np.testing.assert_allclose(res["final_point"], [2 / 3, 2 / 3], atol=1e-6)
    assert res["termination"] == "gradient-tolerance"
    assert "trace" not in res


def test_mean_trace_rows_match_iterations(mean_problem):
    code, out, _ = call(["mean", mean_problem, "--trace", "--tol", "1e-6"])
    res = json.loads(out)
    assert code == 0 and len(res["trace"]) == res["iterations"]
    assert res["final_grad_dual_norm"] <= 1e-6


def test_output_is_byte_reproducible(mean_problem):
    assert call(["mean", mean_problem, "--trace"])[1] == call(["mean", mean_problem, "--trace"])[1]


def test_mean_flow_and_trace_csv(tmp_path):
    csv_path = tmp_path / "trace.csv"
    path = write(tmp_path, {"manifold": EUCLID, "measure": THREE_ATOMS,
                            "solver": {"algorithm": "mean-flow", "p": 2, "x0": [1, 1], "dt": 0.1},
                            "output": {"trace_csv": str(csv_path)}})
    code, out, _ = call(["mean", path])
    assert code == 0
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == ["iteration", "x0", "x1", "objective", "grad_dual_norm"]
    assert len(rows) - 1 == json.loads(out)["iterations"]


def test_median(tmp_path):
    path = write(tmp_path, {"manifold": {"kind": "flat", "norm": {"kind": "euclidean", "metric": [[1]]}},
                            "measure": {"atoms": [{"point": [0], "weight": 0.8},
                                                  {"point": [1], "weight": 0.2}]},
                            "solver": {"algorithm": "median-flow", "p": 1, "x0": [0.7]}})
    code, out, _ = call(["median", path, "--trace"])
    res = json.loads(out)
    assert code == 0 and res["termination"] == "atom-criterion"
    assert res["final_point"] == [0.0]


def test_distance(tmp_path):
    path = write(tmp_path, {"manifold": {"kind": "flat",
                                         "norm": {"kind": "randers", "metric": [[1]], "drift": [0.5]}}})
    code, out, _ = call(["distance", path, "--from", "0", "--to", "1"])
    assert code == 0
    assert json.loads(out) == {"forward": 1.5, "backward": 0.5}


def test_geodesic(tmp_path):
    path = write(tmp_path, {"manifold": {"kind": "riemannian", "metric": "poincare-disk"}})
    code, out, _ = call(["geodesic", path, "--from", "[0, 0]", "--velocity", "0.5,0", "--steps", "64"])
    res = json.loads(out)
    assert code == 0 and len(res["trajectory"]) == 65
    assert res["trajectory"][-1]["point"][0] == pytest.approx(np.tanh(0.5), abs=1e-8)


def test_diagnose(tmp_path):
    path = write(tmp_path, {"manifold": EUCLID, "measure": THREE_ATOMS,
                            "solver": {"p": 2, "x0": [0.5, 0.5]},
                            "bounds": {"k": 1, "delta": 1, "C": 1, "D": 1, "R": 0.1}})
    code, out, _ = call(["diagnose", path])
    res = json.loads(out)
    assert code == 0
    assert res["R_unique"] == pytest.approx(0.7853981633974483)
    assert res["existence_radius"] == pytest.approx(0.2)
    assert res["C_H"] == pytest.approx(2.5)
    assert res["support_condition_eq51"] is True
    for key in ("eta_minus_delta", "injectivity", "second_variation"):
        assert key in res


def test_diagnose_auto_constants(tmp_path):
    path = write(tmp_path, {"manifold": {"kind": "flat", "norm": {"kind": "randers", "metric": [[1]],
                                                                   "drift": [0.5]}},
                            "measure": {"atoms": [{"point": [0], "weight": 0.5},
                                                  {"point": [1], "weight": 0.5}]},
                            "solver": {"p": 2, "x0": [0.5]},
                            "bounds": {"C": "auto", "D": "auto", "beta": 0.0}})
    code, out, _ = call(["diagnose", path])
    res = json.loads(out)
    assert code == 0
    assert res["bounds"]["C"] == pytest.approx(3.0) and res["bounds"]["D"] == pytest.approx(3.0)
    assert res["second_variation"]["all_consistent"]


def test_input_errors(tmp_path, mean_problem):
    assert call(["frobnicate", mean_problem])[0] == 2
    assert call(["mean"])[0] == 2
    assert call(["mean", str(tmp_path / "missing.json")])[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call(["mean", str(bad)])[0] == 2
    weights = write(tmp_path, {"manifold": EUCLID, "measure": {"atoms": [{"point": [0, 0], "weight": 0.7}]}},
                    "w.json")
    assert call(["mean", weights])[0] == 2
    p15 = write(tmp_path, {"manifold": EUCLID, "measure": THREE_ATOMS, "solver": {"p": 1.5}}, "p.json")
    assert call(["mean", p15])[0] == 2
    assert call(["median", mean_problem])[0] == 2


def test_numerical_failure_exit_code(tmp_path):
    path = write(tmp_path, {"manifold": {"kind": "riemannian", "metric": "poincare-disk"}})
    code, _, err = call(["geodesic", path, "--from", "0,0", "--velocity", "40,0"])
    assert code == 3 and "numerical failure" in err


def test_console_entry_point(mean_problem):
    proc = subprocess.run([sys.executable, "-m", "finsler_means.cli", "mean", mean_problem],
                          capture_output=True, text=True, env={"FINSLER_SEED": "3", "PATH": ""})
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["termination"] == "gradient-tolerance"
