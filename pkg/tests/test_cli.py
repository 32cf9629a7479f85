import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from multistep_mle.cli import parse_and_dispatch
from multistep_mle.estimate import EstimatorTrajectory
from multistep_mle.simulate import SamplePath

SHORT = ["--T", "50", "--h", "0.01", "--seed", "3", "--tau", "0.5,1.0"]


def run(argv):
    out = io.StringIO()
    code = parse_and_dispatch(argv, stdout=out)
    return code, out.getvalue()


@pytest.fixture(autouse=True)
def no_env_dir(monkeypatch):
    monkeypatch.delenv("MULTISTEP_MLE_OUTPUT_DIR", raising=False)


def test_fisher_quartic_json():
    code, out = run(["fisher", "--model", "quartic", "--theta", "1.0"])
    assert code == 0
    doc = json.loads(out)
    assert doc["fisher"]["fisher"][0][0] == pytest.approx(4.5, abs=1e-6)
    assert doc["schema_version"] == 1
    assert doc["config"]["model"]["id"] == "quartic"


def test_fisher_ou_and_2d():
    _, out = run(["fisher", "--model", "ou", "--theta", "2.0"])
    assert json.loads(out)["fisher"]["fisher"][0][0] == pytest.approx(0.25, abs=1e-8)
    code, out = run(["fisher", "--model", "quartic2d", "--theta", "0.0,1.0"])
    mat = np.array(json.loads(out)["fisher"]["fisher"])
    assert code == 0 and mat.shape == (2, 2)
    np.testing.assert_allclose(mat, mat.T)


def test_fisher_outside_box_is_config_error():
    assert run(["fisher", "--model", "quartic", "--theta", "5.0"])[0] == 1


def test_estimate_deterministic_csv():
    code, first = run(["estimate", *SHORT])
    assert code == 0
    assert first.startswith("# config: ")
    assert run(["estimate", *SHORT])[1] == first
    traj = EstimatorTrajectory.from_csv(first)
    np.testing.assert_allclose(traj.tau_grid, [0.5, 1.0])
    assert np.all(np.isfinite(traj.estimates))
    assert run(["estimate", *SHORT[:-3], "--seed", "4", "--tau", "0.5,1.0"])[1] != first


def test_estimate_json_has_config():
    code, out = run(["estimate", *SHORT, "--format", "json"])
    doc = json.loads(out)
    assert code == 0
    assert doc["config"]["sim"]["seed"] == 3
    assert len(doc["trajectory"]["estimates"]) == 2


def test_usage_errors_exit_1(tmp_path, capsys):
    missing = tmp_path / "nope.yaml"
    assert run(["estimate", "--config", str(missing)])[0] == 1
    assert str(missing) in capsys.readouterr().err
    assert run(["estimate", "--bogus"])[0] == 1
    assert run(["estimate", "--tau", ""])[0] == 1
    assert run(["estimate", *SHORT[:-2], "--delta", "0.2"])[0] == 1
    assert run(["estimate", "--set", "nonsense"])[0] == 1
    assert run([])[0] == 1


def test_precedence_defaults_file_set_flags(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("sim:\n  T: 60\n  seed: 9\nestimate:\n  delta: 0.6\n  tau_grid: [1.0]\n")
    _, out = run(["estimate", "--config", str(cfg), "--format", "json"])
    doc = json.loads(out)["config"]
    assert doc["sim"]["T"] == 60 and doc["sim"]["seed"] == 9 and doc["estimate"]["delta"] == 0.6
    assert doc["sim"]["h"] == 0.01
    _, out = run(["estimate", "--config", str(cfg), "--set", "sim.seed=11", "--format", "json"])
    assert json.loads(out)["config"]["sim"]["seed"] == 11
    _, out = run(["estimate", "--config", str(cfg), "--set", "sim.seed=11", "--seed", "12",
                  "--format", "json"])
    assert json.loads(out)["config"]["sim"]["seed"] == 12


def test_preset_is_below_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("sim:\n  T: 40\n")
    _, out = run(["fisher", "--preset", "paper-example", "--config", str(cfg)])
    doc = json.loads(out)["config"]
    assert doc["sim"]["T"] == 40 and doc["model"]["upper"] == [2.0]


def test_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MULTISTEP_MLE_OUTPUT_DIR", str(tmp_path / "res"))
    assert run(["fisher"])[0] == 0
    doc = json.loads((tmp_path / "res" / "fisher.json").read_text())
    assert doc["fisher"]["fisher"][0][0] == pytest.approx(4.5, abs=1e-6)


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(["fisher", "--out", str(blocker / "sub")])[0] == 1


def test_simulate_csv_roundtrip(tmp_path):
    code, _ = run(["simulate", "--T", "20", "--seed", "5", "--out", str(tmp_path), "--name", "p"])
    assert code == 0
    text = (tmp_path / "p.csv").read_text()
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#")) + "\n"
    path = SamplePath.from_csv(body)
    assert path.n_steps == 2000
    again = SamplePath.from_csv(path.to_csv())
    np.testing.assert_array_equal(again.values, path.values)


def test_simulate_binary_then_estimate(tmp_path):
    code, out = run(["simulate", "--T", "50", "--seed", "5", "--format", "binary", "--out", str(tmp_path)])
    assert code == 0
    target = tmp_path / "path.bin"
    loaded = SamplePath.read_binary(target)
    assert loaded.n_steps == 5000
    code, traj = run(["estimate", "--path", str(target), "--tau", "1.0"])
    assert code == 0 and np.isfinite(EstimatorTrajectory.from_csv(traj).estimates).all()


def test_simulate_binary_needs_out():
    assert run(["simulate", "--T", "20", "--format", "binary"])[0] == 1


def test_numerical_failure_exit_2(tmp_path):
    flat = SamplePath(h=0.01, values=np.full(5001, 0.3))
    target = tmp_path / "flat.csv"
    target.write_text(flat.to_csv())
    code, _ = run(["estimate", "--model", "quartic2d", "--theta", "0,1", "--path", str(target),
                   "--tau", "1.0"])
    assert code == 2


def test_montecarlo_gate_exit_3():
    base = ["montecarlo", *SHORT, "--replicates", "10"]
    code, out = run(base)
    assert code == 0
    assert "stats" in json.loads(out)
    assert run([*base, "--gate", "--set", "gate.var_low=50"])[0] == 3


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "multistep_mle.cli", "fisher", "--model", "ou"],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["fisher"]["fisher"][0][0] == pytest.approx(0.5, abs=1e-8)
