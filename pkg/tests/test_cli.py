import json
import subprocess
import sys

import numpy as np
import pytest

from margin_lab.cli import main
from margin_lab.model import Dataset, ModelSpec


@pytest.fixture
def workdir(tmp_path):
    spec = ModelSpec(n=8, p=300, mu_norm=3.0, eta=0.125)
    (tmp_path / "spec.json").write_text(json.dumps(spec.to_dict()))
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def test_pipeline(workdir, capsys):
    data, clf = workdir / "d.npz", workdir / "clf.json"
    assert run("gen", "--spec", workdir / "spec.json", "--seed", 4, "--out", data) == 0
    assert Dataset.load(data).n == 8
    assert run("fit", "--data", data, "--method", "oracle", "--out", clf) == 0
    assert json.loads(clf.read_text())["method"]
    assert run("risk", "--data", data, "--classifier", clf, "--n-mc", 2000, "--out", workdir / "r.json") == 0
    risk = json.loads((workdir / "r.json").read_text())
    assert 0 <= risk["test_error_exact"]["value"] <= 1 and "sandwich" in risk
    assert run("audit", "--data", data, "--theorem", "noisy-simple", "--out", workdir / "a.json") == 0
    audit = json.loads((workdir / "a.json").read_text())
    assert set(audit["events"]["holds"]) == {"E1", "E2", "E3", "E4", "E5"}
    assert audit["checklists"][0]["theorem"] == "noisy-simple"
    assert run("geom", "--data", data, "--out", workdir / "g.json") == 0
    geom = json.loads((workdir / "g.json").read_text())
    assert geom["alpha_sum"] == pytest.approx(1.0, abs=1e-8) and "orthogonal_formula" in geom


def test_gd_trajectory(workdir):
    traj = workdir / "traj.csv"
    code = run("fit", "--spec", workdir / "spec.json", "--method", "gd", "--max-iter", 3000,
               "--record-every", 500, "--reference", "--trajectory", traj, "--out", workdir / "w.json")
    assert code == 0 and traj.read_text().count("\n") >= 6


def test_sweep_command(workdir, capsys):
    config = {"base_spec": ModelSpec(n=5, p=100, mu_norm=3.0).to_dict(), "axes": {"mu_norm": [3.0, 6.0]},
              "reps": 2, "outputs": ["zeta_sq_observed"],
              "plot": {"x": "mu_norm", "y": ["zeta_sq_observed"], "scales": ["log", "log"]}}
    (workdir / "sweep.json").write_text(json.dumps(config))
    out = workdir / "out"
    assert run("sweep", "--config", workdir / "sweep.json", "--out", out, "--workers", 2) == 0
    assert (out / "rows.csv").exists() and (out / "summary.csv").exists() and (out / "plot.svg").exists()
    assert "4 rows (0 failed)" in capsys.readouterr().out


def test_invalid_input_exit_code(workdir, capsys):
    assert run("fit", "--data", workdir / "missing.npz") == 2
    bad = ModelSpec(n=4, p=50).to_dict() | {"eta": 0.7}
    (workdir / "bad.json").write_text(json.dumps(bad))
    assert run("gen", "--spec", workdir / "bad.json") == 2
    (workdir / "junk.json").write_text("{not json")
    assert run("gen", "--spec", workdir / "junk.json") == 2
    assert "error:" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    Dataset.from_arrays(np.array([[1.0, 2.0, 0.0], [1.0, 2.0, 0.0]]), y=[1, -1]).save(tmp_path / "s.npz")
    assert run("fit", "--data", tmp_path / "s.npz", "--method", "ls") == 3
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "margin_lab", "verify", "--only", "1", "5"],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.strip().splitlines()
    assert len(lines) == 2 and all(line.startswith("[PASS]") for line in lines)
