import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ptbagging.cli import main, read_predictions
from ptbagging.metrics import confusion, macro_accuracy
from ptbagging.thresholds import threshold_sweep


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_gen_then_bench(workdir):
    assert main(["gen", "--prior", "0.9,0.1", "--n", "2000", "--seed", "7", "--out", "d.csv"]) == 0
    assert main(["bench", "--data", "d.csv", "--sizes", "2", "--out", "b"]) == 0
    rows = list(csv.reader(open(workdir / "b" / "results.csv")))
    assert rows[0] == ["dataset", "method", "n_trees", "rep", "fold", "metric", "value"]
    assert len(rows) - 1 == 5 * 10 * 6
    summary = json.loads((workdir / "b" / "summary.json").read_text())
    assert summary["errors"] == []


def test_bench_missing_config_is_usage_error(workdir, capsys):
    assert main(["bench", "--config", "missing.json"]) == 1
    assert "usage" in capsys.readouterr().err


def test_bad_flags_and_no_command(workdir):
    assert main([]) == 1
    assert main(["bench", "--frobnicate"]) == 1
    assert main(["train", "--data", "x.csv"]) == 1
    assert main(["gen", "--prior", "0.9,x", "--n", "5", "--out", "o.csv"]) == 1


def test_data_errors_exit_two(workdir):
    (workdir / "one.csv").write_text("x,class\n1,a\n2,a\n")
    assert main(["train", "--data", "one.csv", "--out", "m.json"]) == 2
    assert main(["train", "--data", "nope.csv", "--out", "m.json"]) == 2
    assert main(["bench", "--data", "one.csv", "--sizes", "2"]) == 2


def test_bench_config_json_and_platt(workdir):
    main(["gen", "--prior", "0.8,0.2", "--n", "300", "--seed", "1", "--out", "d.csv"])
    cfg = {"schema": 1, "datasets": [{"path": "d.csv", "name": "syn"}],
           "methods": [{"name": "PT_MA", "sampler": {"kind": "bootstrap"},
                        "threshold": {"kind": "prior"}}],
           "ensemble_sizes": [3], "metrics": ["macro_accuracy"], "master_seed": 5}
    (workdir / "c.json").write_text(json.dumps(cfg))
    assert main(["bench", "--config", "c.json", "--calibration", "platt", "--out", "o",
                 "--format", "json"]) == 0
    recs = json.loads((workdir / "o" / "results.json").read_text())
    assert {r["method"] for r in recs} == {"PT_MA", "Platt"}
    summary = json.loads((workdir / "o" / "summary.json").read_text())
    assert len(summary["platt"]) == 10


def test_bench_threads_identical(workdir):
    main(["gen", "--prior", "0.85,0.15", "--n", "300", "--seed", "2", "--out", "d.csv"])
    for k in (1, 2):
        assert main(["bench", "--data", "d.csv", "--sizes", "2,3", "--threads", str(k),
                     "--seed", "4", "--out", f"t{k}"]) == 0
    assert (workdir / "t1" / "results.csv").read_bytes() == \
        (workdir / "t2" / "results.csv").read_bytes()


def test_train_predict_sweep(workdir):
    main(["gen", "--prior", "0.9,0.1", "--n", "800", "--seed", "1", "--out", "tr.csv"])
    main(["gen", "--prior", "0.9,0.1", "--n", "400", "--seed", "2", "--out", "te.csv"])
    assert main(["train", "--data", "tr.csv", "--n-trees", "10", "--seed", "3",
                 "--out", "m.json"]) == 0
    assert main(["predict", "--model", "m.json", "--data", "te.csv", "--out", "p.csv"]) == 0
    truth, names, post = read_predictions(workdir / "p.csv")
    assert names == ["0", "1"] and len(truth) == 400
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-12)
    assert main(["sweep", "--predictions", "p.csv", "--out", "s.csv"]) == 0
    rows = list(csv.reader(open(workdir / "s.csv")))
    assert rows[0] == ["threshold", "metric_value"] and len(rows) == 102
    assert rows[31][0] == "0.30"


def test_predict_csv_round_trip_preserves_sweep(workdir):
    from ptbagging.data import load_csv
    from ptbagging.ensemble import load_ensemble, predict_batch
    from ptbagging.thresholds import ThresholdPolicy
    main(["gen", "--prior", "0.8,0.2", "--n", "500", "--seed", "5", "--out", "tr.csv"])
    main(["gen", "--prior", "0.8,0.2", "--n", "300", "--seed", "6", "--out", "te.csv"])
    main(["train", "--data", "tr.csv", "--n-trees", "7", "--out", "m.json"])
    main(["predict", "--model", "m.json", "--data", "te.csv", "--out", "p.csv"])
    e = load_ensemble(workdir / "m.json")
    te = load_csv(workdir / "te.csv")
    _, post = predict_batch(e, te.X, ThresholdPolicy())
    _, _, post_csv = read_predictions(workdir / "p.csv")
    np.testing.assert_array_equal(post_csv, post)
    y = (te.y == 1).astype(int)
    for metric in ("macro_accuracy", "macro_f1"):
        a = threshold_sweep(post[:, 1], y, metric)
        b = threshold_sweep(post_csv[:, 1], y, metric)
        assert a[:2] == b[:2]
        np.testing.assert_array_equal(a[2], b[2])


def test_predict_prior_threshold_labels(workdir):
    main(["gen", "--prior", "0.9,0.1", "--n", "600", "--seed", "1", "--out", "tr.csv"])
    main(["train", "--data", "tr.csv", "--n-trees", "5", "--out", "m.json"])
    main(["predict", "--model", "m.json", "--data", "tr.csv", "--threshold", "uniform",
          "--format", "json", "--out", "u.json"])
    rows = json.loads((workdir / "u.json").read_text())
    for r in rows:
        assert r["pred"] == ("1" if r["p_1"] > r["p_0"] else "0")


def test_model_load_save(workdir, capsys):
    main(["gen", "--prior", "0.7,0.3", "--n", "200", "--out", "tr.csv"])
    main(["train", "--data", "tr.csv", "--n-trees", "3", "--sampler", "smote",
          "--sampler-param", "neighbors=3", "--out", "m.json"])
    assert main(["model", "save", "--model", "m.json", "--out", "m2.json"]) == 0
    assert (workdir / "m.json").read_bytes() == (workdir / "m2.json").read_bytes()
    capsys.readouterr()
    assert main(["model", "load", "--model", "m.json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n_trees"] == 3 and info["sampler"]["params"]["neighbors"] == 3


def test_report_subcommand(workdir):
    main(["gen", "--prior", "0.85,0.15", "--n", "300", "--seed", "2", "--out", "a.csv"])
    main(["gen", "--prior", "0.8,0.2", "--n", "300", "--seed", "3", "--out", "b.csv"])
    assert main(["bench", "--data", "a.csv", "b.csv", "--sizes", "3", "--sweep",
                 "--dump-posteriors", "--out", "b"]) == 0
    assert main(["report", "--results", "b/results.csv", "--posteriors", "b/posteriors.csv",
                 "--out", "r"]) == 0
    gap = list(csv.DictReader(open(workdir / "r" / "gap.csv")))
    assert {g["method"] for g in gap} == {"PT_MA", "PT_F1", "EB", "RB", "SMOTE"}
    assert all(float(g["mean_gap"]) >= 0 for g in gap)
    assert (workdir / "r" / "fig3_a.csv").exists()
    assert main(["report", "--results", "b/summary.json", "--out", "r2"]) == 2


def test_module_entry_point(workdir):
    out = subprocess.run([sys.executable, "-m", "ptbagging", "bench", "--config", "nope.json"],
                         capture_output=True, text=True)
    assert out.returncode == 1
