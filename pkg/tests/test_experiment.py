import csv
import json

import numpy as np
import pytest

from kaltesn import TimeSeries, monte_carlo_summary, write_csv
from kaltesn.cli import main
from kaltesn.experiment import (ExperimentConfig, clean_data, ingest_csv, run_experiment, run_trial,
                                summarize, trial_seeds)


def tiny(system="lorenz", **kw):
    base = dict(n=40, p=0.1, train_len=300, test_len=40, M=10, trials=2, noise_levels=[0.1],
                washout=20, kalt_spinup=20, transient=100)
    base.update(kw)
    return ExperimentConfig.from_profile(system, "desk", **base)


class TestConfig:
    def test_lorenz_full_defaults(self):
        cfg = ExperimentConfig.from_profile("lorenz", "full")
        assert (cfg.n, cfg.p, cfg.train_len, cfg.alpha, cfg.beta, cfg.M) == (500, 0.01, 6000, 0.3, 1e-6, 300)
        assert (cfg.sigma_x2, cfg.sigma_w2, cfg.dt) == (0.2, 0.2, 0.02)

    def test_rossler_full_defaults(self):
        cfg = ExperimentConfig.from_profile("rossler", "full")
        assert (cfg.n, cfg.train_len, cfg.dt, cfg.M) == (500, 1000, 0.1, 300)

    def test_traffic_full_defaults(self):
        cfg = ExperimentConfig.from_profile("traffic-surrogate", "full")
        assert (cfg.n, cfg.train_len, cfg.alpha, cfg.embed_m, cfg.sigma_x2, cfg.sigma_w2, cfg.dt) == \
            (4000, 500, 0.7, 10, 10.0, 1.0, 1.0)
        assert cfg.test_len == 70 and cfg.d == 10

    def test_desk_profile(self):
        cfg = ExperimentConfig.from_profile("lorenz", "desk")
        assert (cfg.n, cfg.train_len, cfg.M, cfg.trials, cfg.test_len) == (300, 4000, 150, 10, 100)
        assert cfg.washout == cfg.kalt_spinup == 100

    @pytest.mark.parametrize("kw", [dict(trials=0), dict(noise_levels=[]), dict(train_len=1),
                                    dict(system="mars"), dict(trainers=["sgd"]), dict(alpha=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    def test_csv_needs_path(self):
        with pytest.raises(ValueError):
            ExperimentConfig(system="csv-file")

    def test_from_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"system": "rossler", "profile": "full", "trials": 3}))
        cfg = ExperimentConfig.from_file(path, seed=4)
        assert cfg.system == "rossler" and cfg.n == 500 and cfg.trials == 3 and cfg.seed == 4

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(ValueError):
            ExperimentConfig.from_file(path)


def test_trial_seeds_rooted_at_master_plus_index():
    assert trial_seeds(10, 3) == trial_seeds(13, 0)
    assert trial_seeds(10, 3) != trial_seeds(10, 4)
    assert len(set(trial_seeds(0, 0).values())) == 4


def test_paired_trainers_share_data_and_reservoir():
    r = run_trial(tiny(), 0.1, 0)
    assert {row["trainer"] for row in r.rows} == {"ridge", "kalt"}
    assert r.rows[0]["reservoir_seed"] == r.rows[1]["reservoir_seed"]
    assert all(row["status"] == "ok" for row in r.rows)
    assert r.predictions["ridge"].values.shape == r.truth.values.shape


def test_noiseless_lorenz_sanity():
    cfg = ExperimentConfig.from_profile("lorenz", "desk", n=300, train_len=4000, test_len=100,
                                        trainers=["ridge"], noise_levels=[0.0], trials=1)
    rows, _ = run_experiment(cfg)
    assert rows[0]["nrmse"] < 0.2


def test_traffic_pipeline_scalar_outputs():
    r = run_trial(tiny("traffic-surrogate", n=60, train_len=200, test_len=30, noise_levels=[100.0]), 100.0, 0)
    assert r.truth.d == 1
    assert r.predictions["kalt"].values.shape == (1, 30)
    assert np.isfinite(r.rows[0]["pearson"])


def test_csv_source(tmp_path):
    t = np.arange(400.0)
    path = tmp_path / "sensor.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "volume", "other"])
        for ti in t:
            w.writerow([ti, 100 + 50 * np.sin(2 * np.pi * ti / 24), 0])
    cfg = tiny("csv-file", csv_path=str(path), csv_column="volume", n=60, train_len=200, test_len=30,
               embed_m=5, noise_levels=[10.0])
    rows, summary = run_experiment(cfg)
    assert len(rows) == 4 and len(summary) == 2


def test_csv_too_short(tmp_path):
    path = tmp_path / "s.csv"
    write_csv(TimeSeries(np.arange(20.0), 1.0), path)
    cfg = tiny("csv-file", csv_path=str(path), embed_m=3)
    with pytest.raises(ValueError):
        clean_data(cfg, 0)


def test_ingest_round_trip(tmp_path):
    s = TimeSeries(np.random.default_rng(0).standard_normal(50), 0.25)
    path = tmp_path / "s.csv"
    write_csv(s, path)
    back = ingest_csv(path, "x0")
    assert np.array_equal(back.values, s.values) and back.dt == s.dt


def test_summary_matches_rows():
    rows, summary = run_experiment(tiny(trials=3))
    for srow in summary:
        vals = [r["nrmse"] for r in rows if r["trainer"] == srow["trainer"] and r["status"] == "ok"]
        s = monte_carlo_summary(vals)
        assert srow["nrmse_median"] == s.median and srow["nrmse_std"] == s.std


def test_failures_counted_not_summarized():
    rows = [dict(sigma_v2=1.0, trial=i, trainer="kalt", status="ok" if i else "failed",
                 nrmse=float(i) if i else float("nan"), pearson=0.5) for i in range(4)]
    (s,) = summarize(rows)
    assert s["failures"] == 1 and s["trials"] == 4 and s["nrmse_median"] == 2.0


def test_outputs_written_and_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment(tiny(output_dir=str(a)))
    run_experiment(tiny(output_dir=str(b)))
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    header = (a / "results.csv").read_text().splitlines()[0]
    assert header == "sigma_v2,trial,trainer,status,nrmse,pearson,reservoir_seed"
    pred = (a / "sigma2_0.1" / "prediction_0.csv").read_text().splitlines()
    assert pred[0] == "t,truth_0,truth_1,truth_2,ridge_0,ridge_1,ridge_2,kalt_0,kalt_1,kalt_2"
    assert len(pred) == 41
    diag = (a / "sigma2_0.1" / "diagnostics_1.csv").read_text().splitlines()
    assert diag[0].startswith("step,innovation_norm,x_spread,w_spread,x_mean_0")
    assert json.loads((a / "config.json").read_text())["M"] == 10


def test_parallel_matches_serial(tmp_path):
    serial, _ = run_experiment(tiny(trials=2))
    parallel, _ = run_experiment(tiny(trials=2, workers=2))
    assert serial == parallel


class TestCli:
    def test_generate_train_predict_evaluate(self, tmp_path, capsys):
        clean, noisy = tmp_path / "clean.csv", tmp_path / "noisy.csv"
        assert main(["generate", "--system", "lorenz", "--length", "900", "--out", str(clean)]) == 0
        assert main(["generate", "--system", "lorenz", "--length", "800", "--noise", "0.1",
                     "--out", str(noisy)]) == 0
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(dict(system="lorenz", profile="desk", n=60, M=10, washout=50, kalt_spinup=50)))
        for trainer in ("ridge", "kalt"):
            model = tmp_path / trainer
            assert main(["train", "--config", str(cfg), "--data", str(noisy), "--trainer", trainer,
                         "--noise", "0.1", "--out", str(model)]) == 0
            pred = tmp_path / f"{trainer}.csv"
            assert main(["predict", "--model", str(model), "--horizon", "50", "--out", str(pred)]) == 0
            capsys.readouterr()
            assert main(["evaluate", "--truth", str(clean), "--prediction", str(pred)]) == 0
            scores = json.loads(capsys.readouterr().out)
            assert np.isfinite(scores["nrmse"])
        assert (tmp_path / "kalt" / "diagnostics.csv").exists()

    def test_sweep(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(dict(system="lorenz", profile="desk", n=40, p=0.1, M=10, train_len=300,
                                       test_len=20, washout=20, kalt_spinup=20, transient=100)))
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--noise", "0.1,0.5", "--trials", "1",
                     "--out", str(out)]) == 0
        lines = (out / "results.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 2
        assert len((out / "summary.csv").read_text().splitlines()) == 1 + 2 * 2

    def test_single_trainer(self, tmp_path):
        out = tmp_path / "o"
        assert main(["sweep", "--system", "lorenz", "--trainer", "ridge", "--noise", "0.1", "--trials", "1",
                     "--out", str(out)]) == 0
        assert "kalt" not in (out / "results.csv").read_text()

    def test_config_errors_exit_nonzero(self, tmp_path, capsys):
        assert main(["sweep", "--config", str(tmp_path / "missing.json")]) != 0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"trials": 0}))
        assert main(["sweep", "--config", str(bad)]) != 0
        assert "error" in capsys.readouterr().err

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["sweep", "--trials", "many"])
        assert info.value.code != 0
