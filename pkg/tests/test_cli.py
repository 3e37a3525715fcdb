import json

import pytest

from fraudstream.cli import main
from fraudstream.eval import read_jsonl, two_sample_t_test


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "tx.csv"
    assert main(["gen", "--n-records", "300", "--n-features", "4", "--seed", "1", "--out", str(path)]) == 0
    return path


@pytest.fixture
def batch_dir(tmp_path):
    out = tmp_path / "batches"
    args = ["gen", "--batches", "--n-records", "2000", "--n-features", "4", "--batch-size", "200", "--out", str(out)]
    assert main(args) == 0
    return out


def test_gen_writes_dataset(small_csv):
    lines = small_csv.read_text().splitlines()
    assert lines[0] == "f0,f1,f2,f3,label" and len(lines) == 301


def test_static_one_model_one_row(small_csv, tmp_path, capsys):
    out = tmp_path / "res"
    code = main(["static", "--input", str(small_csv), "--models", "nb", "--balancer", "none",
                 "--folds", "3", "--out", str(out)])
    assert code == 0
    rows = read_jsonl(out / "static_results.jsonl")
    assert len(rows) == 1 and rows[0]["model"] == "nb" and len(rows[0]["folds"]["auc"]) == 3
    assert "Mean AUC" in capsys.readouterr().out


def test_static_unknown_balancer_exit_2(small_csv, tmp_path, capsys):
    code = main(["static", "--input", str(small_csv), "--balancer", "bogus", "--out", str(tmp_path)])
    assert code == 2
    assert "smote-tomek" in capsys.readouterr().err


def test_static_missing_input_exit_1(tmp_path):
    assert main(["static", "--input", str(tmp_path / "nope.csv"), "--models", "nb", "--balancer", "none",
                 "--out", str(tmp_path)]) == 1


@pytest.mark.slow
def test_static_full_product_table(small_csv, tmp_path):
    out = tmp_path / "full"
    code = main(["static", "--input", str(small_csv), "--no-grid", "--folds", "3", "--gan-epochs", "5",
                 "--out", str(out)])
    assert code == 0
    rows = read_jsonl(out / "static_results.jsonl")
    assert len(rows) == 49
    assert {(r["model"], r["balancer"]) for r in rows} == {
        (m, b) for m in ("nb", "lr", "svm", "dt", "rf", "gbt", "mlp")
        for b in ("none", "smote", "smote-tomek", "smote-enn", "adasyn", "vgan", "wgan")
    }
    header = (out / "static_table.txt").read_text().splitlines()[1]
    assert all(b in header for b in ("vgan", "wgan", "smote-enn"))


def test_stream_ten_batches(batch_dir, tmp_path):
    out = tmp_path / "s"
    assert main(["stream", "--batches-dir", str(batch_dir), "--models", "dt", "--out", str(out)]) == 0
    rows = read_jsonl(out / "stream_windows.jsonl")
    assert sum("window_id" in r for r in rows) == 9
    assert sum(bool(r.get("summary")) for r in rows) == 1
    assert all(r["latency_ms"] is None for r in rows if "window_id" in r)
    assert (out / "plot_dt.csv").read_text().splitlines()[0] == "window_id,auc"


def test_stream_window_larger_than_batches(batch_dir, tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["stream", "--batches-dir", str(batch_dir), "--ws", "11", "--models", "dt", "--out", str(out)]) == 0
    assert "warning" in capsys.readouterr().err
    assert (out / "stream_windows.jsonl").read_text() == ""


def test_stream_four_models_four_series(batch_dir, tmp_path):
    out = tmp_path / "s"
    assert main(["stream", "--batches-dir", str(batch_dir), "--out", str(out),
                 "--hp", "rf.n_estimators=5"]) == 0
    assert sorted(p.name for p in out.glob("plot_*.csv")) == ["plot_dt.csv", "plot_knn.csv", "plot_lr.csv", "plot_rf.csv"]


def test_compare_file_with_itself(small_csv, tmp_path, capsys):
    out = tmp_path / "r"
    main(["static", "--input", str(small_csv), "--models", "dt", "--balancer", "none", "--folds", "3",
          "--out", str(out)])
    capsys.readouterr()
    res = tmp_path / "cmp.json"
    f = str(out / "static_results.jsonl")
    assert main(["compare", "--a", f, "--b", f, "--test", "ttest", "--out", str(res)]) == 0
    assert "accept H0" in capsys.readouterr().out
    payload = json.loads(res.read_text())
    assert payload["statistic"] == 0.0 and payload["p_value"] == 1.0


def test_compare_matches_direct_call(batch_dir, tmp_path, capsys):
    out = tmp_path / "s"
    main(["stream", "--batches-dir", str(batch_dir), "--models", "dt,nb", "--out", str(out)])
    f = str(out / "stream_windows.jsonl")
    res = tmp_path / "cmp.json"
    assert main(["compare", "--a", f, "--b", f, "--model-a", "dt", "--model-b", "nb", "--out", str(res)]) == 0
    rows = [r for r in read_jsonl(f) if "window_id" in r]
    a = [r["auc"] for r in rows if r["model"] == "dt"]
    b = [r["auc"] for r in rows if r["model"] == "nb"]
    direct = two_sample_t_test(a, b)
    payload = json.loads(res.read_text())
    assert payload["statistic"] == direct.statistic and payload["p_value"] == direct.p_value


def test_compare_length_mismatch_exit_2(small_csv, batch_dir, tmp_path):
    out = tmp_path / "r"
    main(["static", "--input", str(small_csv), "--models", "dt", "--balancer", "none", "--folds", "3",
          "--out", str(out)])
    s = tmp_path / "s"
    main(["stream", "--batches-dir", str(batch_dir), "--models", "dt", "--out", str(s)])
    code = main(["compare", "--a", str(out / "static_results.jsonl"), "--b", str(s / "stream_windows.jsonl")])
    assert code == 2
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    a.write_text(json.dumps({"model": "x", "folds": {"auc": [0.5, 0.6, 0.7]}}) + "\n")
    b.write_text(json.dumps({"model": "x", "folds": {"auc": [0.5, 0.6]}}) + "\n")
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 2


def test_config_file_and_flag_override(batch_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# stream run\nbatches_dir = {batch_dir}\nmodels = dt\nws = 3\n")
    out = tmp_path / "s"
    assert main(["stream", "--config", str(cfg), "--out", str(out)]) == 0
    assert sum("window_id" in r for r in read_jsonl(out / "stream_windows.jsonl")) == 8
    assert main(["stream", "--config", str(cfg), "--ws", "2", "--out", str(out)]) == 0
    assert sum("window_id" in r for r in read_jsonl(out / "stream_windows.jsonl")) == 9
    cfg.write_text("colour = blue\n")
    assert main(["stream", "--config", str(cfg)]) == 2


def test_stream_is_byte_identical(tmp_path):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        args = ["stream", "--gen-inline", "--n-records", "3000", "--batch-size", "300", "--n-features", "4",
                "--balancer", "smote", "--hp", "rf.n_estimators=5", "--seed", "3", "--out", str(out)]
        assert main(args) == 0
        outs.append(out)
    for name in ("stream_windows.jsonl", "plot_rf.csv", "plot_knn.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
