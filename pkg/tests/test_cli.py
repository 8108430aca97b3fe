import json

import numpy as np
import pytest

from lficonflict.cli import main
from lficonflict.io import load_forest, load_training_set


def _write_config(path, **overrides):
    cfg = {
        "model": "poisson",
        "n_train": 400,
        "seed": 7,
        "out": str(path.parent / "out"),
        "targets": ["eta"],
        "forest": {"n_trees": 20, "min_node_size": 5},
        "partitions": [
            {"name": "keep_mean", "keep": ["mean"]},
            {"name": "keep_var", "keep": ["var"]},
        ],
        "imputation": {"engine": "linear-bayes", "n_imputations": 5, "n_reference": 6},
        "abc": {"k": 50},
        "grid": {"size": 256},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return cfg


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """gen-train + train once; several commands reuse the artefacts."""
    root = tmp_path_factory.mktemp("poisson")
    cfg_path = root / "config.json"
    _write_config(cfg_path)
    obs = root / "observed.csv"
    obs.write_text("0,0,0,0,5\n")
    assert main(["gen-train", "--config", str(cfg_path)]) == 0
    assert main(["train", "--config", str(cfg_path), "--train", str(root / "out" / "train.csv")]) == 0
    return root, cfg_path, obs


def test_gen_train_outputs(pipeline):
    root, _, _ = pipeline
    ts = load_training_set(root / "out" / "train.csv")
    assert ts.n == 400
    assert ts.param_names == ("eta",)
    assert ts.summary_names == ("mean", "var")


def test_gen_train_idempotent(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    _write_config(a, out=str(tmp_path / "out_a"), n_train=60)
    _write_config(b, out=str(tmp_path / "out_b"), n_train=60)
    assert main(["gen-train", "--config", str(a)]) == 0
    assert main(["gen-train", "--config", str(b)]) == 0
    assert (tmp_path / "out_a" / "train.csv").read_bytes() == (
        tmp_path / "out_b" / "train.csv"
    ).read_bytes()


def test_seed_override_changes_rows(tmp_path):
    cfg = tmp_path / "c.json"
    _write_config(cfg, out=str(tmp_path / "out"), n_train=60)
    assert main(["gen-train", "--config", str(cfg)]) == 0
    first = (tmp_path / "out" / "train.csv").read_bytes()
    assert main(["gen-train", "--config", str(cfg), "--seed", "99"]) == 0
    assert (tmp_path / "out" / "train.csv").read_bytes() != first


def test_train_writes_forest(pipeline):
    root, _, _ = pipeline
    forest = load_forest(root / "out" / "forest_eta.npz")
    assert forest.n_features_in_ == 2
    assert forest.n_trees == 20


def test_tune_then_train_uses_best(tmp_path):
    cfg_path = tmp_path / "c.json"
    _write_config(
        cfg_path,
        out=str(tmp_path / "out"),
        n_train=150,
        forest={"n_trees": 10},
        tuning={"grid": [{"n_trees": 10, "mtry": 1}, {"n_trees": 10, "mtry": 2}], "folds": 2},
    )
    train_csv = str(tmp_path / "out" / "train.csv")
    assert main(["gen-train", "--config", str(cfg_path)]) == 0
    assert main(["tune", "--config", str(cfg_path), "--train", train_csv]) == 0
    tuned = json.loads((tmp_path / "out" / "tuning.json").read_text())
    assert set(tuned) == {"eta"}
    assert len(tuned["eta"]["results"]) == 2
    assert main(["train", "--config", str(cfg_path), "--train", train_csv]) == 0
    forest = load_forest(tmp_path / "out" / "forest_eta.npz")
    assert forest.get_params()["mtry"] == tuned["eta"]["best"]["mtry"]


def test_abc_outputs(pipeline):
    root, cfg_path, obs = pipeline
    train_csv = str(root / "out" / "train.csv")
    assert main(
        ["abc", "--config", str(cfg_path), "--train", train_csv, "--observed", str(obs)]
    ) == 0
    accepted = np.loadtxt(root / "out" / "abc_accepted.csv", delimiter=",", skiprows=1)
    assert accepted.shape == (50, 2)
    assert np.all(np.diff(accepted[:, 1]) >= 0)
    meta = json.loads((root / "out" / "abc_meta.json").read_text())
    assert meta["k"] == 50
    assert meta["used_components"] == ["mean", "var"]


def test_abc_k_too_large(pipeline, tmp_path):
    root, _, obs = pipeline
    cfg_path = tmp_path / "big.json"
    _write_config(cfg_path, out=str(root / "out"), abc={"k": 5000})
    code = main(
        [
            "abc",
            "--config", str(cfg_path),
            "--train", str(root / "out" / "train.csv"),
            "--observed", str(obs),
        ]
    )
    assert code == 2


def test_diagnose_outputs(pipeline):
    root, cfg_path, obs = pipeline
    train_csv = str(root / "out" / "train.csv")
    assert main(
        ["diagnose", "--config", str(cfg_path), "--train", train_csv, "--observed", str(obs)]
    ) == 0
    out = root / "out"
    for name in ("keep_mean", "keep_var"):
        report = json.loads((out / f"report_eta_{name}.json").read_text())
        assert 0.0 <= report["p_tilde"] <= 1.0
        assert report["n_imputations"] == 5
        assert (out / f"report_eta_{name}.r_reference.csv").exists()
        assert (out / f"density_eta_{name}_subset.csv").exists()
        assert (out / f"density_eta_{name}_refit.csv").exists()
    assert (out / "density_eta_full.csv").exists()


def test_diagnose_after_tune_refits_narrow_blocks(tmp_path):
    """Tuned mtry describes the full design; the refit on a one-column kept
    block must clamp it rather than crash."""
    cfg_path = tmp_path / "c.json"
    _write_config(
        cfg_path,
        out=str(tmp_path / "out"),
        n_train=150,
        forest={"n_trees": 10, "min_node_size": 5},
        tuning={"grid": [{"n_trees": 10, "mtry": 2}], "folds": 2},
    )
    obs = tmp_path / "observed.csv"
    obs.write_text("0,0,0,0,5\n")
    train_csv = str(tmp_path / "out" / "train.csv")
    assert main(["gen-train", "--config", str(cfg_path)]) == 0
    assert main(["tune", "--config", str(cfg_path), "--train", train_csv]) == 0
    assert main(["train", "--config", str(cfg_path), "--train", train_csv]) == 0
    assert main(
        ["diagnose", "--config", str(cfg_path), "--train", train_csv, "--observed", str(obs)]
    ) == 0
    for name in ("keep_mean", "keep_var"):
        assert (tmp_path / "out" / f"density_eta_{name}_refit.csv").exists()


def test_diagnose_without_forest_is_config_error(pipeline, tmp_path):
    root, cfg_path, obs = pipeline
    code = main(
        [
            "diagnose",
            "--config", str(cfg_path),
            "--train", str(root / "out" / "train.csv"),
            "--observed", str(obs),
            "--out", str(tmp_path / "empty"),
        ]
    )
    assert code == 2


def test_numerical_failure_exit_code(pipeline, monkeypatch):
    root, cfg_path, obs = pipeline

    def boom(*args, **kwargs):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr("lficonflict.cli.calibrate_conflict", boom)
    code = main(
        [
            "diagnose",
            "--config", str(cfg_path),
            "--train", str(root / "out" / "train.csv"),
            "--observed", str(obs),
        ]
    )
    assert code == 3


def test_bad_config_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": "weird"}))
    assert main(["gen-train", "--config", str(bad)]) == 2

    no_n = tmp_path / "no_n.json"
    no_n.write_text(json.dumps({"model": "poisson"}))
    assert main(["gen-train", "--config", str(no_n)]) == 2

    unknown_key = tmp_path / "uk.json"
    unknown_key.write_text(json.dumps({"model": "poisson", "n_train": 10, "bogus": 1}))
    assert main(["gen-train", "--config", str(unknown_key)]) == 2


def test_unknown_target_rejected(pipeline, tmp_path):
    root, _, _ = pipeline
    cfg_path = tmp_path / "t.json"
    _write_config(cfg_path, out=str(root / "out"), targets=["zzz"])
    code = main(
        ["train", "--config", str(cfg_path), "--train", str(root / "out" / "train.csv")]
    )
    assert code == 2


@pytest.fixture(scope="module")
def series_pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("ricker_raw")
    cfg_path = root / "config.json"
    cfg = {
        "model": "ricker",
        "model_options": {"summaries": "raw", "n_obs": 12},
        "n_train": 150,
        "seed": 3,
        "out": str(root / "out"),
        "targets": ["log_sigma"],
        "forest": {"n_trees": 15, "min_node_size": 10},
        "imputation": {"n_imputations": 4, "n_reference": 5},
        "window": {"k": 3},
        "grid": {"size": 256},
    }
    cfg_path.write_text(json.dumps(cfg))
    assert main(["gen-train", "--config", str(cfg_path)]) == 0
    assert main(
        ["train", "--config", str(cfg_path), "--train", str(root / "out" / "train.csv")]
    ) == 0
    ts = load_training_set(root / "out" / "train.csv")
    obs = root / "observed.csv"
    obs.write_text(",".join(str(v) for v in ts.summaries[0]) + "\n")
    return root, cfg_path, obs


def test_window_scan_outputs(series_pipeline):
    root, cfg_path, obs = series_pipeline
    assert main(
        ["window-scan", "--config", str(cfg_path), "--observed", str(obs)]
    ) == 0
    report = json.loads((root / "out" / "window_log_sigma.json").read_text())
    assert report["k"] == 3
    assert len(report["p_values"]) == 12
    table = np.loadtxt(root / "out" / "window_log_sigma.csv", delimiter=",", skiprows=1)
    assert table.shape == (12, 5)


def test_window_scan_length_mismatch(series_pipeline, tmp_path):
    root, cfg_path, _ = series_pipeline
    short = tmp_path / "short.csv"
    short.write_text("1,2,3,4,5\n")
    code = main(["window-scan", "--config", str(cfg_path), "--observed", str(short)])
    assert code == 2


def test_selftest_command():
    assert main(["selftest"]) == 0
