import json

import numpy as np
import pytest

from gridrates import cli
from gridrates.config import RunConfig
from gridrates.errors import ConfigError


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "n_users": 300,
        "seed": 17,
        "k": 8,
        "corpus_overrides": {"total_range": [26000.0, 60000.0]},
    }))
    return path


def _run(*argv):
    return cli.main([str(a) for a in argv])


def test_datagen_writes_expected_rows(tmp_path, small_config):
    assert _run("datagen", "--config", small_config, "--out", tmp_path) == 0
    lines = (tmp_path / "corpus.csv").read_text().strip().splitlines()
    assert len(lines) == 301
    assert lines[0].startswith("user_id,t0,")
    meta = json.loads((tmp_path / "meta_datagen.json").read_text())
    assert meta["n_users"] == 300 and len(meta["config_hash"]) == 16


def test_datagen_deterministic(tmp_path, small_config):
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        assert _run("datagen", "--config", small_config, "--out", tmp_path / sub) == 0
    assert (tmp_path / "a" / "corpus.csv").read_bytes() == \
        (tmp_path / "b" / "corpus.csv").read_bytes()


def test_datagen_rejects_zero_users(tmp_path):
    assert _run("datagen", "--n", 0, "--out", tmp_path) == 1


def test_datagen_full_scale_row_count(tmp_path):
    assert _run("datagen", "--n", 7699, "--seed", 1, "--out", tmp_path) == 0
    with open(tmp_path / "corpus.csv") as fh:
        assert sum(1 for _ in fh) == 7700  # header + one row per user


def test_price_constant_corpus_gives_constant_price(tmp_path):
    corpus = tmp_path / "flat.csv"
    rows = "\n".join(f"u{i}," + ",".join(["1000"] * 24) for i in range(40))
    corpus.write_text("user_id," + ",".join(f"t{t}" for t in range(24)) + "\n" + rows + "\n")
    assert _run("price", "--corpus", corpus, "--out", tmp_path) == 0
    lines = (tmp_path / "price.csv").read_text().strip().splitlines()
    prices = {line.split(",")[2] for line in lines[2:]}
    assert len(prices) == 1


def test_unknown_flag_is_validation_error(tmp_path):
    assert _run("datagen", "--bogus", 3, "--out", tmp_path) == 1


def test_price_table_shape_and_peak_alignment(tmp_path, small_config):
    assert _run("datagen", "--config", small_config, "--out", tmp_path) == 0
    assert _run("price", "--config", small_config, "--out", tmp_path,
                "--corpus", tmp_path / "corpus.csv") == 0
    lines = (tmp_path / "price.csv").read_text().strip().splitlines()
    assert lines[0] == "# config_hash=" + json.loads(
        (tmp_path / "meta_price.json").read_text())["config_hash"]
    assert lines[1] == "t,load,price"
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 24
    loads = np.array([float(r[1]) for r in rows])
    prices = np.array([float(r[2]) for r in rows])
    assert loads.argmax() == prices.argmax()  # affine map preserves the peak


def test_cluster_methods_and_artifacts(tmp_path, small_config):
    assert _run("datagen", "--config", small_config, "--out", tmp_path) == 0
    corpus = tmp_path / "corpus.csv"
    for method in ("profile", "gkc", "skc"):
        assert _run("cluster", "--config", small_config, "--out", tmp_path,
                    "--corpus", corpus, "--method", method) == 0
        doc = json.loads((tmp_path / f"clustering_{method}.json").read_text())
        assert doc["k"] == len(doc["clusters"])
        rates = (tmp_path / f"rates_{method}.csv").read_text().strip().splitlines()
        assert len(rates) == 302  # hash line + header + one row per user
    gkc_meta = json.loads((tmp_path / "meta_cluster_gkc.json").read_text())
    assert gkc_meta["criterion_ok"] is True
    skc_meta = json.loads((tmp_path / "meta_cluster_skc.json").read_text())
    assert skc_meta["criterion_ok"] is True
    assert skc_meta["n_clusters"] >= gkc_meta["n_clusters"]


def test_vulnerability_sweep_monotone_columns(tmp_path, small_config):
    assert _run("datagen", "--config", small_config, "--out", tmp_path) == 0
    corpus = tmp_path / "corpus.csv"
    assert _run("cluster", "--config", small_config, "--out", tmp_path,
                "--corpus", corpus, "--method", "profile") == 0
    assert _run("vulnerability", "--config", small_config, "--out", tmp_path,
                "--corpus", corpus,
                "--clustering", tmp_path / "clustering_profile.json") == 0
    lines = (tmp_path / "vulnerability_sweep.csv").read_text().strip().splitlines()
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[2:]])
    assert rows.shape[0] == 41  # theta 0..0.2 step 0.005
    assert rows[0, 0] == 0.0
    assert np.all(np.diff(rows[:, 1]) >= 0)        # percentage monotone
    assert np.all(np.diff(rows[:, 2:], axis=0) >= 0)  # per-cluster counts monotone
    smooth = json.loads((tmp_path / "smoothness.json").read_text())
    assert smooth["delta_observed"] >= 0
    reports = (tmp_path / "disguise_reports.csv").read_text().strip().splitlines()
    assert reports[0] == "user_id,cr,best_target,benefit"


def test_vulnerability_on_rate_clustering(tmp_path, small_config):
    assert _run("datagen", "--config", small_config, "--out", tmp_path) == 0
    corpus = tmp_path / "corpus.csv"
    assert _run("cluster", "--config", small_config, "--out", tmp_path,
                "--corpus", corpus, "--method", "gkc") == 0
    assert _run("vulnerability", "--config", small_config, "--out", tmp_path,
                "--corpus", corpus,
                "--clustering", tmp_path / "clustering_gkc.json") == 0
    smooth = json.loads((tmp_path / "smoothness.json").read_text())
    assert smooth["delta_observed"] <= smooth["band_bound"] + 1e-12
    assert smooth["n_violations"] == 0


def test_sensitivity_monotone_in_rho(tmp_path, small_config):
    assert _run("datagen", "--config", small_config, "--out", tmp_path) == 0
    assert _run("sensitivity", "--config", small_config, "--out", tmp_path,
                "--corpus", tmp_path / "corpus.csv",
                "--rho-grid", "0.2,0.5,1.0,2.0,100.0") == 0
    lines = (tmp_path / "sensitivity.csv").read_text().strip().splitlines()
    assert lines[1] == "rho,a,kappa"
    rows = [line.split(",") for line in lines[2:]]
    by_a = {}
    for rho, a, kappa in rows:
        by_a.setdefault(a, []).append(int(kappa))
    for seq in by_a.values():
        assert seq == sorted(seq, reverse=True)
        assert seq[-1] == 1  # huge rho covers everything


def test_diversity_sigma_and_drill(tmp_path, small_config):
    assert _run("datagen", "--config", small_config, "--out", tmp_path) == 0
    corpus = tmp_path / "corpus.csv"
    assert _run("cluster", "--config", small_config, "--out", tmp_path,
                "--corpus", corpus, "--method", "gkc") == 0
    assert _run("diversity", "--config", small_config, "--out", tmp_path,
                "--corpus", corpus,
                "--clustering", tmp_path / "clustering_gkc.json",
                "--drill", "0", "--drill-k", "3") == 0
    lines = (tmp_path / "sigma.csv").read_text().strip().splitlines()
    assert lines[1] == "cluster,size,price,sigma"
    sigmas = [float(line.split(",")[3]) for line in lines[2:]]
    assert all(0.0 <= s <= 2.0 for s in sigmas)
    sub = json.loads((tmp_path / "subclusters_0.json").read_text())
    assert sub["kind"] == "profile"


def test_missing_corpus_is_runtime_error(tmp_path, small_config):
    code = _run("price", "--config", small_config, "--out", tmp_path,
                "--corpus", tmp_path / "missing.csv")
    assert code == 2  # OS-level read failure is a runtime error


def test_bad_config_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run("datagen", "--config", bad, "--out", tmp_path) == 1
    unknown = tmp_path / "unknown.json"
    unknown.write_text('{"no_such_key": 1}')
    assert _run("datagen", "--config", unknown, "--out", tmp_path) == 1


def test_config_defaults_and_hash_stability():
    cfg = RunConfig()
    assert cfg.baseline_k() == 30
    assert RunConfig(corpus_kind="commercial").baseline_k() == 24
    assert cfg.hash() == RunConfig().hash()
    assert cfg.with_overrides(seed=1).hash() != cfg.hash()
    grid = cfg.theta_grid()
    assert grid[0] == 0.0 and grid[-1] == pytest.approx(0.2) and len(grid) == 41
    with pytest.raises(ConfigError):
        RunConfig(rho=-1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(theta_max=1.0).validate()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"a": 0.0})  # cost curvature must be positive
