import json
import subprocess
import sys

import numpy as np
import pytest

from transcount import links, persist
from transcount.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def _csv_body(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest: ")
    return lines[1:]


def test_fit_negbin_quine_table(tmp_path, capsys):
    assert run(tmp_path, "fit", "--model", "negbin", "--data", "quine", "--outcome", "Days") == 0
    out = capsys.readouterr().out
    assert "Eth 0.569 0.153 3.713" in out.splitlines()
    doc = json.loads((tmp_path / "model.json").read_text())
    assert doc["manifest"] == "model.manifest.json"
    manifest = json.loads((tmp_path / "model.manifest.json").read_text())
    assert manifest["command"] == "fit" and manifest["outputs"] == ["model.json"]
    assert len(next(iter(manifest["inputs"].values()))) == 64


def test_null_model_theta_table(tmp_path, capsys):
    y = np.array([0, 0, 1, 1, 1, 2, 2, 3, 3, 3, 3, 4, 5, 5, 6])
    data = tmp_path / "null.csv"
    data.write_text("y\n" + "\n".join(map(str, y)) + "\n")
    code = run(tmp_path, "fit", "--model", "transition", "--smoother", "theta", "--lambda", "0",
               "--M", "6", "--data", str(data), "--outcome", "y")
    assert code == 2  # nobody passes the largest count: flagged divergence
    theta = {}
    for line in capsys.readouterr().out.splitlines():
        if line.startswith("theta["):
            name, value = line.split()
            theta[int(name[6:-1])] = float(value)
    haz = np.array([(y > r).sum() / (y >= r).sum() for r in range(6)])
    np.testing.assert_allclose([theta[r] for r in range(6)], links.inverse(haz), atol=1e-5)


def test_lambda_zero_with_empty_categories(tmp_path, capsys):
    data = tmp_path / "null.csv"
    data.write_text("y\n0\n1\n4\n2\n")
    assert run(tmp_path, "fit", "--lambda", "0", "--data", str(data), "--outcome", "y") == 1
    assert "larger smoothing" in capsys.readouterr().err


def test_missing_outcome_column(tmp_path, capsys):
    assert run(tmp_path, "fit", "--model", "poisson", "--data", "quine", "--outcome", "Absent") == 1
    assert "Absent" in capsys.readouterr().err


def test_usage_errors_exit_one(tmp_path, capsys):
    assert main(["frobnicate"]) == 1
    assert run(tmp_path, "fit", "--model", "tobit", "--data", "quine") == 1
    assert run(tmp_path, "simulate", "--family", "binomial", "--reps", "1") == 1
    assert run(tmp_path, "fit", "--model", "negbin", "--data", str(tmp_path / "nope.csv")) == 1
    assert run(tmp_path, "compare", "--data", "quine", "--models", "poisson,odd") == 1


def test_separation_exit_two(tmp_path, capsys):
    assert run(tmp_path, "fit", "--model", "transition-zero", "--lambda", "16", "--data", "boating") == 2
    out = capsys.readouterr()
    assert "zero:Userfee" in out.out and "---" in out.out and "separation" in out.err


def test_predict_and_score(tmp_path, capsys):
    assert run(tmp_path, "fit", "--model", "transition", "--lambda", "16", "--data", "quine") == 0
    model = tmp_path / "model.json"
    assert run(tmp_path, "predict", "--model-file", str(model), "--data", "quine", "--M", "90") == 0
    rows = _csv_body(tmp_path / "pmf.csv")
    assert rows[0].split(",")[:3] == ["index", "mean", "p0"] and len(rows[0].split(",")) == 93
    assert run(tmp_path, "predict", "--model-file", str(model), "--data", "quine", "--M", "120", "--output", "w.csv") == 0
    assert len(_csv_body(tmp_path / "w.csv")[0].split(",")) == 123
    probs = np.array([list(map(float, r.split(",")[2:])) for r in rows[1:]])
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    assert run(tmp_path, "score", "--model-file", str(model), "--data", "quine", "--rule", "brier") == 0
    assert _csv_body(tmp_path / "scores.csv")[0] == "index,y,brier"
    assert run(tmp_path, "predict", "--model-file", str(model), "--data", "nmes_males") == 1
    loaded = persist.load(model)
    assert loaded.spec.lam == 16.0


def test_compare_deterministic_and_replayable(tmp_path, capsys):
    args = ["compare", "--data", "quine", "--models", "poisson,negbin,transition@64", "--replications", "3",
            "--seed", "5"]
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    assert (a / "scores.csv").read_bytes() == (b / "scores.csv").read_bytes()
    rows = _csv_body(a / "scores.csv")
    assert rows[0] == "model,replication,rps,seed" and len(rows) == 1 + 3 * 3
    summary = json.loads((a / "scores.summary.json").read_text())
    assert summary["manifest"] == "scores.manifest.json" and summary["replications_used"] == 3
    assert main(["replay", str(a / "scores.manifest.json"), "--out", str(c)]) == 0
    assert (c / "scores.csv").read_bytes() == (a / "scores.csv").read_bytes()


def test_compare_single_replication(tmp_path, capsys):
    assert run(tmp_path, "compare", "--data", "quine", "--models", "poisson,negbin", "--replications", "1") == 0
    assert len(_csv_body(tmp_path / "scores.csv")) == 3


def test_replay_refuses_changed_input(tmp_path, capsys):
    data = tmp_path / "d.csv"
    data.write_text("y,x\n0,1\n1,2\n3,0\n2,5\n1,1\n")
    run(tmp_path, "fit", "--model", "poisson", "--data", str(data), "--outcome", "y")
    data.write_text("y,x\n0,1\n1,2\n3,0\n2,5\n9,1\n")
    assert main(["replay", str(tmp_path / "model.manifest.json"), "--out", str(tmp_path / "r")]) == 1
    assert "changed" in capsys.readouterr().err


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 3, "compare": {"replications": 2, "models": "poisson"}}))
    assert run(tmp_path, "compare", "--config", str(cfg), "--data", "quine", "--replications", "1") == 0
    manifest = json.loads((tmp_path / "scores.manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["options"]["replications"] == 1
    assert manifest["options"]["models"] == "poisson"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(tmp_path, "compare", "--config", str(cfg), "--data", "quine") == 1


def test_cv_commands(tmp_path, capsys):
    assert run(tmp_path, "cv", "--data", "nmes_males", "--grid", "4,16", "--replications", "2", "--jobs", "2") == 0
    rows = _csv_body(tmp_path / "cv.csv")
    assert rows[0] == "lambda,mean_rps,failures" and len(rows) == 3
    assert run(tmp_path, "cv", "--data", "quine", "--model", "transition-varying", "--varying", "Lrn",
               "--method", "aic", "--grid", "1,64", "--output", "aic.csv") == 0
    assert _csv_body(tmp_path / "aic.csv")[0] == "term,lambda"
    assert run(tmp_path, "cv", "--data", "quine", "--model", "negbin") == 1


def test_simulate_single_replication(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--family", "negbin", "--nu", "0.625", "--mu", "5", "--n", "100",
               "--reps", "1", "--lambda", "16") == 0
    rows = _csv_body(tmp_path / "pmf.csv")
    assert rows[0] == "r,true,avg_transition,avg_family"
    assert all(len(r.split(",")) == 4 for r in rows)


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "transcount.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
