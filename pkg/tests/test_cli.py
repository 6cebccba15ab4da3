import json
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from icurisk import load_cohort, save_cohort
from icurisk.cli import main
from icurisk.models import load_model

from test_cohort import _complete_values, _tiny_table


def test_generate_writes_n_plus_one_lines(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["generate", "--n", "200", "--prevalence", "0.2", "--seed", "7",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 201
    assert (tmp_path / "c.csv.manifest.json").exists()


def test_generate_missing_out_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--n", "10"])
    assert exc.value.code == 2


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    flags = ["--n", "150", "--prevalence", "0.2", "--seed", "3"]
    assert main(["generate", *flags, "--out", str(a)]) == 0
    assert main(["generate", *flags, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_manifest_contents(tmp_path):
    out = tmp_path / "c.csv"
    main(["generate", "--n", "60", "--prevalence", "0.2", "--out", str(out)])
    manifest = json.loads((tmp_path / "c.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "generate"
    assert manifest["config"]["seed"] == 0
    assert manifest["output"] == str(out)


def _clean_csv(tmp_path, n=40):
    rng = np.random.default_rng(0)
    rows = []
    for _ in range(n):
        w = float(rng.uniform(70, 90))
        h = float(rng.uniform(1.6, 1.8))
        rows.append(_complete_values(weight=w, height=h, bmi=w / h ** 2,
                                     age=float(rng.uniform(55, 70))))
    labels = [int(i % 5 == 0) for i in range(n)]
    path = tmp_path / "clean.csv"
    save_cohort(_tiny_table(rows, labels), path)
    return path


def test_preprocess_clean_input_reports_zero_drops(tmp_path, capsys):
    path = _clean_csv(tmp_path)
    out = tmp_path / "out.csv"
    assert main(["preprocess", "--in", str(path), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "records in: 40" in stdout
    assert "records retained: 40" in stdout
    assert "dropped" not in stdout


def test_preprocess_paper_coefficients(tmp_path, capsys):
    rng = np.random.default_rng(1)
    rows = []
    for _ in range(30):
        w = float(rng.uniform(60, 100))
        h = float(rng.uniform(1.5, 1.9))
        rows.append(_complete_values(weight=w, height=h, bmi=w / h ** 2))
    rows.append(_complete_values(weight=80.0, height=None, bmi=None))
    path = tmp_path / "in.csv"
    save_cohort(_tiny_table(rows, [0] * 31), path)
    out = tmp_path / "out.csv"
    assert main(["preprocess", "--in", str(path), "--out", str(out),
                 "--paper-coefficients"]) == 0
    assert "intercept 5.6925 slope 0.2769" in capsys.readouterr().out
    table = load_cohort(out)
    imputed = [r for r in table if abs(r.values["weight"] - 80.0) < 1e-9
               and abs(r.values["bmi"] - (5.6925 + 0.2769 * 80.0)) < 1e-6]
    assert imputed


def test_preprocess_unreadable_input_exit_1(tmp_path):
    assert main(["preprocess", "--in", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "out.csv")]) == 1


def test_train_writes_model(tmp_path):
    csv = _clean_csv(tmp_path, n=60)
    out = tmp_path / "model.json"
    assert main(["train", "--in", str(csv), "--family", "tree",
                 "--out-model", str(out), "--no-smote"]) == 0
    trained = load_model(out)
    assert trained.family == "tree"
    assert trained.model.max_depth == 5  # default depth
    assert (tmp_path / "model.json.manifest.json").exists()


def test_train_unknown_family_usage_error(tmp_path):
    csv = _clean_csv(tmp_path)
    with pytest.raises(SystemExit) as exc:
        main(["train", "--in", str(csv), "--family", "xgboost",
              "--out-model", str(tmp_path / "m.json")])
    assert exc.value.code == 2


def test_train_with_search_space(tmp_path, capsys):
    csv = _clean_csv(tmp_path, n=80)
    space = tmp_path / "space.json"
    space.write_text(json.dumps({"l1_lambda": [0.0, 1e6]}))
    out = tmp_path / "model.json"
    assert main(["train", "--in", str(csv), "--family", "logistic",
                 "--search-space", str(space), "--out-model", str(out),
                 "--no-smote", "--cv-folds", "3"]) == 0
    stdout = capsys.readouterr().out
    assert "search selected: l1_lambda=0" in stdout
    trained = load_model(out)
    assert trained.metrics["cv_folds"] == 3


def test_evaluate_single_trial_zero_std(tmp_path, capsys):
    csv = _clean_csv(tmp_path, n=80)
    report = tmp_path / "report.csv"
    assert main(["evaluate", "--in", str(csv), "--families", "logistic,tree",
                 "--trials", "1", "--report-out", str(report), "--no-smote"]) == 0
    lines = report.read_text().strip().splitlines()
    assert lines[0] == "family,metric,mean,std"
    assert len(lines) == 7  # 2 families x 3 metrics
    for line in lines[1:]:
        assert line.endswith(",0.0")


def test_evaluate_deterministic_bytes(tmp_path):
    csv = _clean_csv(tmp_path, n=80)
    r1, r2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    flags = ["--in", str(csv), "--families", "logistic", "--trials", "2",
             "--seed", "11", "--no-smote"]
    assert main(["evaluate", *flags, "--report-out", str(r1)]) == 0
    assert main(["evaluate", *flags, "--report-out", str(r2)]) == 0
    assert r1.read_bytes() == r2.read_bytes()


@pytest.fixture()
def trained_model_path(tmp_path):
    csv = _clean_csv(tmp_path, n=60)
    out = tmp_path / "model.json"
    main(["train", "--in", str(csv), "--family", "logistic",
          "--out-model", str(out), "--no-smote"])
    return csv, out


def test_explain_row(trained_model_path, capsys):
    csv, model = trained_model_path
    assert main(["explain", "--model", str(model), "--cohort", str(csv),
                 "--row-index", "0"]) == 0
    stdout = capsys.readouterr().out
    assert "base=" in stdout and "prediction=" in stdout


def test_explain_row_out_of_range(trained_model_path, capsys):
    csv, model = trained_model_path
    assert main(["explain", "--model", str(model), "--cohort", str(csv),
                 "--row-index", "999"]) == 2


def test_explain_overrides_and_json(trained_model_path, tmp_path, capsys):
    csv, model = trained_model_path
    out = tmp_path / "force.json"
    assert main(["explain", "--model", str(model), "--cohort", str(csv),
                 "--row-index", "0", "--set", "age=90", "--set",
                 "service_unit=CSRU", "--json-out", str(out)]) == 0
    doc = json.loads(out.read_text())
    force = doc["model"]
    assert set(force) == {"base", "prediction", "arrows", "mode", "tolerance"}
    signed = sum(a["phi"] for a in force["arrows"])
    assert abs(force["base"] + signed - force["prediction"]) < 1e-9


def test_explain_importance_intersection(tmp_path, capsys):
    csv = _clean_csv(tmp_path, n=80)
    lr_path = tmp_path / "lr.json"
    tree_path = tmp_path / "dt.json"
    main(["train", "--in", str(csv), "--family", "logistic",
          "--out-model", str(lr_path), "--no-smote"])
    main(["train", "--in", str(csv), "--family", "tree",
          "--out-model", str(tree_path), "--no-smote"])
    assert main(["explain", "--model", str(lr_path), "--model", str(tree_path),
                 "--cohort", str(csv), "--importance", "--top", "5"]) == 0
    stdout = capsys.readouterr().out
    assert "intersection of top features:" in stdout
    assert "[logistic] top 5" in stdout
    assert "[tree] top 5" in stdout


def test_train_reproducible_bytes(tmp_path):
    csv = _clean_csv(tmp_path, n=60)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    flags = ["--in", str(csv), "--family", "forest", "--seed", "3",
             "--param", "n_trees=8", "--no-smote"]
    assert main(["train", *flags, "--out-model", str(a)]) == 0
    assert main(["train", *flags, "--out-model", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_supplies_defaults(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"generate": {"seed": 42, "prevalence": 0.2,
                                               "n": 120}}))
    out = tmp_path / "c.csv"
    assert main(["--config", str(config), "generate", "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "c.csv.manifest.json").read_text())
    assert manifest["config"]["seed"] == 42
    # explicit flags still win over config defaults
    out2 = tmp_path / "c2.csv"
    assert main(["--config", str(config), "generate", "--seed", "7",
                 "--out", str(out2)]) == 0
    manifest2 = json.loads((tmp_path / "c2.csv.manifest.json").read_text())
    assert manifest2["config"]["seed"] == 7


def test_bad_config_file_exit_2(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"unknown_cmd": {}}))
    assert main(["--config", str(config), "generate", "--n", "5",
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_serve_occupied_port_exit_1(tmp_path):
    blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    try:
        assert main(["serve", "--model-dir", str(tmp_path),
                     "--bind", f"127.0.0.1:{port}"]) == 1
    finally:
        blocker.close()


@pytest.mark.slow
def test_serve_sigint_clean_shutdown(tmp_path):
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    proc = subprocess.Popen(
        [sys.executable, "-m", "icurisk.cli", "serve", "--model-dir", str(tmp_path),
         "--bind", f"127.0.0.1:{port}"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    try:
        deadline = time.time() + 20
        ready = False
        while time.time() < deadline:
            try:
                with socket.create_connection(("127.0.0.1", port), timeout=0.3):
                    ready = True
                    break
            except OSError:
                time.sleep(0.1)
        assert ready, "server never opened its port"
        proc.send_signal(signal.SIGINT)
        assert proc.wait(timeout=15) == 0
        # an empty model dir serves fine but warns
        assert "registry is empty" in proc.stdout.read()
    finally:
        if proc.poll() is None:
            proc.kill()


@pytest.mark.slow
def test_demo_end_to_end(tmp_path, capsys):
    out_dir = tmp_path / "demo"
    assert main(["demo", "--out-dir", str(out_dir), "--n", "600",
                 "--trials", "1"]) == 0
    assert (out_dir / "cohort.csv").exists()
    assert (out_dir / "cohort.clean.csv").exists()
    assert (out_dir / "logistic.json").exists()
    assert (out_dir / "report.csv").exists()
    assert (out_dir / "explanation.json").exists()
