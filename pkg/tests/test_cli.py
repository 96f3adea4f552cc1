import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qudit_tomo.cli import SWEEP_COLUMNS, PipelineConfig, main, run_pipeline, sweep
from qudit_tomo.generators import tensor_basis
from qudit_tomo.matrix import matrix_from_json
from qudit_tomo.states import DensityMatrix, named_state


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _strip_timings(text):
    report = json.loads(text)
    report.pop("timings")
    return json.dumps(report, sort_keys=True)


def test_pipeline_d_state_hvdl_linear(tmp_path, capsys):
    # default seed
    code, _, _ = _run(capsys, "pipeline", "--name", "D", "--basis", "qubit-hvdl", "--shots", "1e6",
                      "--method", "linear", "--out", tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["schema"] == 1
    assert report["fidelity"] >= 0.999
    assert report["budget"] == {"mixed": 3, "pure": 2}
    assert set(report["timings"]) == {"setup_s", "simulate_s", "reconstruct_s"}
    assert report["condition_number"] > 1
    for name in ("counts.json", "reconstruction.json"):
        assert (tmp_path / name).exists()


def test_d_state_fidelity_band_rate():
    # r_x = 2 n_D / (n_H + n_V) - 1 has variance 8/N, and an inward error delta
    # costs delta/2 of fidelity while outward errors are projected away, so
    # P(F >= 0.999) = Phi(0.002 / sqrt(8/N)) for N = 1e6.
    from statistics import NormalDist

    want = NormalDist().cdf(0.002 / math.sqrt(8e-6))
    runs = 400
    fids = [run_pipeline(PipelineConfig(basis="qubit-hvdl", d=2, n=1, name="D", seed=s, shots=1e6,
                                        method="linear"))["fidelity"] for s in range(runs)]
    rate = np.mean(np.array(fids) >= 0.999)
    assert abs(rate - want) < 3 * math.sqrt(want * (1 - want) / runs)


def test_pipeline_two_qutrit_exact(tmp_path, capsys):
    code, _, _ = _run(capsys, "pipeline", "--name", "max-entangled", "--d", 3, "--n", 2,
                      "--basis", "product:qutrit-paper9xqutrit-paper9", "--method", "linear", "--exact",
                      "--out", tmp_path)
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert abs(report["fidelity"] - 1) < 1e-9
    assert report["budget"]["mixed"] == 80


@pytest.mark.parametrize("d,n,basis", [(2, 1, "qubit-nonorth:0.4:0.7"), (3, 1, "qutrit-paper9"),
                                       (2, 2, "product:qubit-hvdlxqubit-hvdl")])
def test_exact_linear_pipeline_is_perfect(d, n, basis):
    cfg = PipelineConfig(basis=basis, d=d, n=n, random="mixed", seed=3, method="linear", exact=True)
    assert abs(run_pipeline(cfg)["fidelity"] - 1) < 1e-9


def test_malformed_basis_file(tmp_path, capsys):
    bad = tmp_path / "basis.json"
    bad.write_text(json.dumps({"d": 2, "n": 1, "labels": ["a", "b", "c", "d"],
                               "kets": [[[1, 0], [0, 0]], [[0, 0], [1, 0]], "oops", [[1, 0], [0, 1]]]}))
    code, out, err = _run(capsys, "reconstruct", "--counts", tmp_path / "nope.json", "--basis", bad)
    assert code == 1 and out == ""
    error = json.loads(err)["error"]
    assert "kets" in error["field"]
    code, _, err = _run(capsys, "pipeline", "--name", "D", "--basis", bad)
    assert code == 1 and "kets" in json.loads(err)["error"]["field"]


def test_missing_file_and_bad_arguments(tmp_path, capsys):
    code, _, err = _run(capsys, "fidelity", "--a", tmp_path / "missing.json", "--b", tmp_path / "x.json")
    assert code == 1 and json.loads(err)["error"]["type"]
    code, _, err = _run(capsys, "simulate", "--basis", "qubit-hvdl")
    assert code == 1 and json.loads(err)["error"]["field"] == "arguments"
    code, _, err = _run(capsys, "pipeline", "--name", "D", "--basis", "no-such-basis")
    assert code == 1 and json.loads(err)["error"]["field"] == "basis"


def test_numerical_failure_exit_code(tmp_path, capsys):
    counts = tmp_path / "counts.json"
    counts.write_text(json.dumps({"labels": list("HVDL"), "counts": [0, 0, 5, 5], "scale": "unknown", "seed": 0}))
    code, _, err = _run(capsys, "reconstruct", "--counts", counts, "--basis", "qubit-hvdl", "--method", "linear")
    assert code == 2
    assert json.loads(err)["error"]["type"] == "NegativeScale"
    code, _, err = _run(capsys, "reconstruct", "--counts", counts, "--basis", "qubit-hvdl", "--method", "mle",
                        "--max-iter", 1)
    assert code == 2 and json.loads(err)["error"]["type"] == "NonConvergence"


def test_reports_byte_stable(tmp_path, capsys):
    texts = []
    for k in range(2):
        out = tmp_path / str(k)
        assert _run(capsys, "pipeline", "--random", "mixed", "--d", 3, "--basis", "qutrit-paper9",
                    "--shots", 1e4, "--seed", 42, "--method", "mle", "--out", out)[0] == 0
        texts.append((_strip_timings((out / "report.json").read_text()),
                      (out / "counts.json").read_bytes(), (out / "reconstruction.json").read_bytes()))
    assert texts[0] == texts[1]


def test_csv_report(tmp_path, capsys):
    assert _run(capsys, "pipeline", "--name", "H", "--basis", "qubit-hvdl", "--format", "csv",
                "--out", tmp_path)[0] == 0
    header, row = (tmp_path / "report.csv").read_text().strip().split("\n")
    assert "fidelity" in header.split(",") and len(row.split(",")) == len(header.split(","))


def test_single_point_sweep_matches_pipeline():
    cfg = PipelineConfig(basis="qubit-hvdl", d=2, n=1, random="pure", seed=7, shots=1e4, method="projected")
    (row,) = sweep(cfg, "shots", [1e4], replicates=1)
    assert row["mean_fidelity"] == run_pipeline(cfg)["fidelity"]
    assert row["failures"] == 0 and row["std_fidelity"] == 0.0


def test_sweep_budget_over_d(capsys):
    code, out, _ = _run(capsys, "sweep", "--axis", "d", "--values", "2,3,4", "--replicates", 2,
                        "--shots", 1e4, "--random", "mixed")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0].split(",") == list(SWEEP_COLUMNS)
    budget = [int(r.split(",")[SWEEP_COLUMNS.index("budget")]) for r in lines[1:]]
    assert budget == [3, 8, 15]


def test_sweep_theta_infidelity_grows():
    cfg = PipelineConfig(basis="qubit-hvdl", d=2, n=1, random="mixed", seed=0, shots=1e4, method="linear")
    rows = sweep(cfg, "theta", [math.pi / 4, 0.5, 0.3, 0.15], replicates=200)
    infid = [r["mean_infidelity"] for r in rows]
    assert all(b >= a for a, b in zip(infid, infid[1:])), infid
    assert all(r["failures"] == 0 for r in rows)


def test_sweep_parallel_matches_serial():
    cfg = PipelineConfig(basis="qubit-hvdl", d=2, n=1, random="mixed", seed=1, shots=1e3, method="projected")
    serial = sweep(cfg, "shots", [1e3, 1e4], replicates=4)
    parallel = sweep(cfg, "shots", [1e3, 1e4], replicates=4, jobs=2)
    assert serial == parallel


def test_sweep_records_failed_points():
    cfg = PipelineConfig(basis="qubit-hvdl", d=2, n=1, random="mixed", seed=1, shots=1e3, method="linear")
    rows = sweep(cfg, "theta", [0.3, 0.0], replicates=2)
    assert rows[0]["failures"] == 0
    assert rows[1]["failures"] == 2 and rows[1]["error"].startswith("DegenerateSet")


def test_gen_basis(capsys):
    code, out, _ = _run(capsys, "gen-basis", "--d", 3)
    ops = [matrix_from_json(m) for m in json.loads(out)]
    np.testing.assert_array_equal(np.array(ops), tensor_basis(3, 1).operators)


def test_gen_state_simulate_reconstruct_fidelity(tmp_path, capsys):
    state, counts, rec = tmp_path / "s.json", tmp_path / "c.json", tmp_path / "r.json"
    assert _run(capsys, "gen-state", "--random", "pure", "--d", 3, "--seed", 4, "--out", state)[0] == 0
    assert _run(capsys, "simulate", "--state", state, "--basis", "qutrit-paper9", "--shots", 1e5,
                "--seed", 2, "--out", counts)[0] == 0
    data = json.loads(counts.read_text())
    assert len(data["counts"]) == 9 and data["seed"] == 2 and data["scale"] == 1e5
    assert _run(capsys, "reconstruct", "--counts", counts, "--basis", "qutrit-paper9", "--method", "mle",
                "--out", rec)[0] == 0
    out = json.loads(rec.read_text())
    assert out["method"] == "mle" and out["diagnostics"]["converged"]
    code, text, _ = _run(capsys, "fidelity", "--a", state, "--b", rec)
    assert code == 0 and json.loads(text)["fidelity"] > 0.99
    code, text, _ = _run(capsys, "fidelity", "--a", state, "--b", state, "--format", "csv")
    assert text.split("\n")[0] == "fidelity" and abs(float(text.split("\n")[1]) - 1) < 1e-12


def test_gen_state_named(capsys):
    code, out, _ = _run(capsys, "gen-state", "--name", "L")
    rho = DensityMatrix.from_json(json.loads(out))
    np.testing.assert_allclose(rho.matrix, named_state("L", 2).matrix, atol=1e-15)


def test_budget_command(capsys):
    code, out, _ = _run(capsys, "budget", "--d", 3, "--n", 2)
    row = json.loads(out)
    assert row["budget"] == 80 and row["optics_elements"] == 18 and row["optics_success_probability"] == 0.25
    code, out, _ = _run(capsys, "budget", "--d", 2, "--n", 2, "--pure")
    assert json.loads(out)["budget"] == 6


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "qudit_tomo", "budget", "--d", "2", "--n", "2"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and json.loads(out.stdout)["budget"] == 15
