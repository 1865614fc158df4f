"""End-to-end tests for the command-line interface."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from msadapt import estimators as est_mod, harness, knn_demo, model, oracle
from msadapt.cli import main


@pytest.fixture
def runner():
    return CliRunner()


_CONFIG = """
config_kind = cluster
d = 6
m = 4
n = 30
delta_grid = 0.5, 4.0
estimators = naive, elimination
reps = 8
seed = 3
name = smoke
"""


def _write_config(tmp_path, text=_CONFIG):
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return str(path)


def test_simulate_writes_csv(tmp_path, runner):
    cfg = _write_config(tmp_path)
    out_dir = tmp_path / "results"
    result = runner.invoke(
        main, ["simulate", "--config", cfg, "--out", str(out_dir)]
    )
    assert result.exit_code == 0, result.output
    path = result.output.strip()
    assert path.endswith("smoke_mse.csv")
    lines = open(path, encoding="utf-8").read().splitlines()
    assert lines[0] == ",".join(harness.CSV_HEADER)
    assert len(lines) == 1 + 2 * 2  # grid points x estimators


def test_simulate_rerun_is_byte_identical(tmp_path, runner):
    cfg = _write_config(tmp_path)
    paths = []
    for sub in ("a", "b"):
        result = runner.invoke(
            main, ["simulate", "--config", cfg, "--out", str(tmp_path / sub)]
        )
        assert result.exit_code == 0, result.output
        paths.append(result.output.strip())
    assert open(paths[0], "rb").read() == open(paths[1], "rb").read()


def test_simulate_fast_flag_overrides_reps(tmp_path, runner):
    cfg = _write_config(tmp_path, _CONFIG.replace("reps = 8", "reps = 500"))
    result = runner.invoke(
        main,
        ["simulate", "--config", cfg, "--fast", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    rows = open(result.output.strip(), encoding="utf-8").read().splitlines()
    assert all(line.split(",")[9] == "50" for line in rows[1:])


def test_simulate_env_seed_override(tmp_path, runner):
    cfg = _write_config(tmp_path)
    base = runner.invoke(
        main, ["simulate", "--config", cfg, "--out", str(tmp_path / "d")]
    )
    forced = runner.invoke(
        main, ["simulate", "--config", cfg, "--out", str(tmp_path / "e")],
        env={"MSA_SEED": "77"},
    )
    assert base.exit_code == 0 and forced.exit_code == 0
    rows_base = open(base.output.strip(), encoding="utf-8").read().splitlines()
    rows_forced = open(forced.output.strip(),
                       encoding="utf-8").read().splitlines()
    assert all(line.split(",")[10] == "3" for line in rows_base[1:])
    assert all(line.split(",")[10] == "77" for line in rows_forced[1:])
    assert rows_base[1] != rows_forced[1]  # different draws, different MSE


def test_simulate_rejects_bad_config(tmp_path, runner):
    cfg = _write_config(tmp_path, "config_kind = cluster\nbogus = 1\n")
    result = runner.invoke(
        main, ["simulate", "--config", cfg, "--out", str(tmp_path)]
    )
    assert result.exit_code != 0


def test_oracle_rate_matches_api(runner):
    result = runner.invoke(main, [
        "oracle-rate", "--h", "0.1,0.3", "--n", "50,50",
        "--n0", "100", "--d", "5", "--tau", "1.0",
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    ref = oracle.oracle_rate(
        model.BiasConfiguration(np.array([0.1, 0.3])),
        model.SampleSizes(100, (50, 50)), 5, 1.0,
    )
    assert payload["rate"] == ref.rate
    assert payload["argmin_set"] == list(ref.argmin_set.sorted_members)
    assert payload["d"] == 5 and payload["tau"] == 1.0
    assert "breakdown" not in payload


def test_oracle_rate_breakdown(runner):
    result = runner.invoke(main, [
        "oracle-rate", "--h", "0.2,0.1,0.4", "--n", "30,40,50",
        "--n0", "60", "--d", "4", "--breakdown",
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    rows = payload["breakdown"]
    assert len(rows) == 4  # target alone plus one per added source
    best = min(r["variance"] + r["bias_sq"] for r in rows)
    assert np.isclose(best, payload["rate"])


def test_oracle_rate_bound_flag(runner):
    args = ["oracle-rate", "--h", "1.5,0.2", "--n", "40,40",
            "--n0", "80", "--d", "3"]
    rejected = runner.invoke(main, args)
    assert rejected.exit_code != 0
    accepted = runner.invoke(main, args + ["--bound", "2.0"])
    assert accepted.exit_code == 0, accepted.output
    assert json.loads(accepted.output)["rate"] > 0


def _estimate_input(tmp_path):
    data = {
        "theta_tilde": [[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]],
        "n0": 100,
        "n": [100, 100],
        "tau": 1.0,
    }
    path = tmp_path / "input.json"
    path.write_text(json.dumps(data))
    return str(path), data


def test_estimate_naive_and_elimination(tmp_path, runner):
    path, data = _estimate_input(tmp_path)
    result = runner.invoke(main, ["estimate", "--input", path,
                                  "--estimator", "naive"])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["estimate"] == [0.0, 0.0]

    result = runner.invoke(main, ["estimate", "--input", path,
                                  "--estimator", "elimination"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["kept"] == [0, 1]  # the far source is screened out
    assert payload["estimate"] == [0.05, 0.0]


def test_estimate_matches_api_for_each_name(tmp_path, runner):
    path, data = _estimate_input(tmp_path)
    est = model.LocalEstimates(np.asarray(data["theta_tilde"]), (0, 0))
    sizes = model.SampleSizes(100, (100, 100))
    fam = est_mod.prefix_family(2)
    expected = {
        "two_source": est_mod.two_source_structured(est, sizes, 1.0),
        "model_selection": est_mod.model_selection(
            est, sizes, fam, est_mod.TargetSplit.practical(est, sizes)
        ),
        "two_cluster": est_mod.two_cluster_adaptive(
            model.reuse_as_splits(est, sizes)
        ),
        "clustering": est_mod.practical_clustering_estimator(
            est, sizes, 2, 2, 2.0 * np.log(2 * 100.0), seed=0
        ),
    }
    for name, vec in expected.items():
        result = runner.invoke(main, ["estimate", "--input", path,
                                      "--estimator", name])
        assert result.exit_code == 0, (name, result.output)
        got = json.loads(result.output)["estimate"]
        assert np.allclose(got, vec, rtol=0, atol=0), name


def test_estimate_intersection_reports_depth(tmp_path, runner):
    path, data = _estimate_input(tmp_path)
    result = runner.invoke(main, ["estimate", "--input", path,
                                  "--estimator", "intersection"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    sizes = model.SampleSizes(100, (100, 100))
    delta = est_mod.default_delta_intersection(sizes, 2, 1.0)
    est = model.LocalEstimates(np.asarray(data["theta_tilde"]), (0, 0))
    vec, t_hat = est_mod.intersection_estimator(est, sizes, 1.0, delta)
    assert payload["t_hat"] == t_hat
    assert np.allclose(payload["estimate"], vec, rtol=0, atol=0)


def test_estimate_rejects_row_mismatch(tmp_path, runner):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({
        "theta_tilde": [[0.0], [1.0]], "n0": 10, "n": [10, 10], "tau": 1.0,
    }))
    result = runner.invoke(main, ["estimate", "--input", str(path),
                                  "--estimator", "naive"])
    assert result.exit_code != 0
    assert "rows but n lists" in result.output


def test_knn_demo_matches_api(tmp_path, runner):
    out = tmp_path / "rates.csv"
    result = runner.invoke(main, [
        "knn-demo", "--m-grid", "64,128", "--reps", "3",
        "--seed", "4", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert result.output.strip() == str(out)
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(harness.CSV_HEADER)
    assert len(lines) == 3

    f = knn_demo.holder_function(1.0)
    ref = knn_demo.rate_sweep(f, 1.0, [64, 128], 3, 4)
    for line, rec in zip(lines[1:], ref):
        fields = line.split(",")
        assert fields[0] == "knn"
        assert fields[2] == str(rec["m"])
        assert fields[6] == "adaptive_knn"
        assert float(fields[7]) == rec["mse_mean"]
        assert json.loads(",".join(fields[11:]).strip('"').replace('""', '"'))[
            "mean_k_hat"] == rec["mean_k_hat"]


def test_knn_demo_env_seed(tmp_path, runner):
    out = tmp_path / "rates.csv"
    result = runner.invoke(
        main,
        ["knn-demo", "--m-grid", "64", "--reps", "2", "--out", str(out)],
        env={"MSA_SEED": "123"},
    )
    assert result.exit_code == 0, result.output
    line = out.read_text().splitlines()[1]
    assert line.split(",")[10] == "123"


def test_reproduce_figures_cli(tmp_path, runner, monkeypatch):
    monkeypatch.setattr(harness, "_FIGURE_D", 8)
    monkeypatch.setattr(harness, "_FIGURE_N", 32)
    monkeypatch.setattr(harness, "_FIGURE_M", 4)
    monkeypatch.setattr(harness, "_CLUSTER_RHOS", (0.5,))
    monkeypatch.setattr(harness, "_CLUSTER_GRID", (1.0, 4.0))
    monkeypatch.setattr(harness, "_SEP1_GRID", (0.125, 2.0))
    monkeypatch.setattr(harness, "_SEP2_GRID", (0.5, 8.0))
    out_dir = tmp_path / "figs"
    result = runner.invoke(main, [
        "reproduce-figures", "--out", str(out_dir), "--fast", "--no-plots",
    ])
    assert result.exit_code == 0, result.output
    assert (out_dir / "cluster_mse.csv").exists()
    assert (out_dir / "sep2_mse.csv").exists()
    assert not list(out_dir.glob("*.png"))
    printed = dict(line.split(": ", 1) for line in
                   result.output.strip().splitlines())
    assert set(printed) == {"cluster_mse", "cluster_cost",
                            "sep1_mse", "sep2_mse"}
