import json
import math
import os
import textwrap

import numpy as np
import pytest

from gradstop.cli import (
    ConfigError,
    RunConfig,
    load_config,
    main,
    run,
    verify,
)
from gradstop.model import PRESETS


def write_config(tmp_path, body, name="run.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body), encoding="utf-8")
    return path


SMALL_SYNTH = """
    [dataset]
    source = synthetic
    scenario = blob_uniform
    n_inlier = 190
    n_outlier = 10
    dim = 5

    [model]
    kind = ae
    hidden = 8

    [stopper]
    preset = ae
    epochs = 20
    n_eval = 80

    [run]
    seeds = 0,1
    modes = both
    auc_ties = strict
"""


class TestPresets:
    def test_ae_profile_loads_exactly(self):
        hp = PRESETS["ae"]
        assert hp.epochs == 100
        assert hp.lr == 0.005
        assert hp.k == 20
        assert (hp.t_cs, hp.t_cb) == (0.01, 0.05)
        assert hp.t_d == 1.57
        assert hp.w == 20
        assert hp.r_down == 0.001

    def test_dsvdd_profile(self):
        hp = PRESETS["dsvdd"]
        assert hp.lr == 0.001
        assert (hp.t_cs, hp.t_cb) == (0.0, 0.1)
        assert hp.w == 10

    def test_presets_command_exits_zero(self, capsys):
        assert main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "ae" in out and "dsvdd" in out and "inf" in out


class TestLoadConfig:
    def test_parses_synthetic_run(self, tmp_path):
        cfg = load_config(write_config(tmp_path, SMALL_SYNTH))
        assert cfg.kind == "ae"
        assert cfg.seeds == (0, 1)
        assert cfg.modes == ("vanilla", "gradstop")
        assert cfg.hp.epochs == 20
        assert cfg.hp.lr == 0.005  # preset value survives partial override
        assert cfg.synthetic is not None

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.ini")

    def test_inf_threshold_parses(self, tmp_path):
        body = SMALL_SYNTH + "\n"
        body = body.replace("preset = ae", "preset = ae\n    t_d = inf")
        cfg = load_config(write_config(tmp_path, body))
        assert cfg.hp.t_d == math.inf

    def test_unknown_mode_rejected(self, tmp_path):
        body = SMALL_SYNTH.replace("modes = both", "modes = sideways")
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, body))

    def test_csv_source_requires_path(self, tmp_path):
        body = SMALL_SYNTH.replace("source = synthetic", "source = csv")
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, body))

    def test_env_var_supplies_default_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GRADSTOP_OUT", str(tmp_path / "from-env"))
        cfg = load_config(write_config(tmp_path, SMALL_SYNTH))
        assert str(cfg.out_dir).endswith("from-env")


class TestRun:
    @pytest.fixture()
    def cfg(self, tmp_path):
        from dataclasses import replace

        cfg = load_config(write_config(tmp_path, SMALL_SYNTH))
        return replace(cfg, out_dir=tmp_path / "out")

    def test_writes_all_artifacts(self, cfg):
        summary = run(cfg)
        assert len(summary.rows) == 4  # 2 seeds x 2 modes
        out = cfg.out_dir
        names = sorted(p.name for p in out.iterdir())
        assert "summary.json" in names
        tags = [
            f"synthetic-blob_uniform_ae_{mode}_seed{seed}"
            for seed in (0, 1)
            for mode in ("vanilla", "gradstop")
        ]
        for tag in tags:
            assert f"{tag}_telemetry.csv" in names
            assert f"{tag}_scores.txt" in names
            assert f"{tag}_summary.json" in names

    def test_telemetry_row_count_equals_metric_epochs(self, cfg):
        run(cfg)
        path = cfg.out_dir / "synthetic-blob_uniform_ae_vanilla_seed0_telemetry.csv"
        lines = path.read_text().strip().splitlines()
        header, rows = lines[0], lines[1:]
        assert header == (
            "epoch,batch_loss,C_top,C_last,C_delta,D,auc,"
            "mean_inlier_loss,mean_outlier_loss"
        )
        assert len(rows) == cfg.hp.epochs // cfg.hp.resample_interval

    def test_scores_file_round_trips_exactly(self, cfg):
        run(cfg)
        path = cfg.out_dir / "synthetic-blob_uniform_ae_gradstop_seed0_scores.txt"
        values = [float(line) for line in path.read_text().splitlines()]
        assert len(values) == 200
        # 17 significant digits reproduce the float64 bit pattern
        rewritten = [float(f"{v:.17g}") for v in values]
        assert values == rewritten

    def test_run_summary_schema(self, cfg):
        run(cfg)
        path = cfg.out_dir / "synthetic-blob_uniform_ae_gradstop_seed1_summary.json"
        payload = json.loads(path.read_text())
        assert set(payload) == {
            "dataset", "model", "seed", "best_epoch", "stop_epoch",
            "stop_reason", "auc_best", "auc_final", "hyperparameters",
        }
        assert payload["seed"] == 1
        assert payload["model"] == "ae"
        assert 0.0 <= payload["auc_best"] <= 1.0

    def test_aggregate_recomputable_from_rows(self, cfg):
        run(cfg)
        payload = json.loads((cfg.out_dir / "summary.json").read_text())
        rows = payload["rows"]
        for mode, agg in payload["aggregates"].items():
            vals = [r["auc_final"] for r in rows if r["mode"] == mode]
            assert agg["auc_final_mean"] == pytest.approx(float(np.mean(vals)))
            assert agg["auc_final_std"] == pytest.approx(float(np.std(vals)))

    def test_byte_identical_across_invocations(self, cfg, tmp_path):
        from dataclasses import replace

        run(replace(cfg, out_dir=tmp_path / "a"))
        run(replace(cfg, out_dir=tmp_path / "b"))
        files_a = sorted((tmp_path / "a").iterdir())
        files_b = sorted((tmp_path / "b").iterdir())
        assert [p.name for p in files_a] == [p.name for p in files_b]
        for pa, pb in zip(files_a, files_b):
            assert pa.read_bytes() == pb.read_bytes()

    def test_vanilla_and_gradstop_share_trajectory(self, cfg):
        run(cfg)
        out = cfg.out_dir
        van = (out / "synthetic-blob_uniform_ae_vanilla_seed0_telemetry.csv").read_text()
        grd = (out / "synthetic-blob_uniform_ae_gradstop_seed0_telemetry.csv").read_text()
        # gradstop telemetry is a prefix of vanilla telemetry (equal when
        # no early stop fired)
        assert van.startswith(grd) or van == grd


class TestMainExitCodes:
    def test_run_via_main(self, tmp_path, capsys):
        path = write_config(tmp_path, SMALL_SYNTH)
        code = main(
            ["run", "--config", str(path), "--out", str(tmp_path / "o"),
             "--seed", "3", "--mode", "vanilla"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "seed=3" in out and "vanilla" in out

    def test_missing_config_gives_1(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.ini")]) == 1

    def test_missing_csv_gives_2(self, tmp_path, capsys):
        body = """
            [dataset]
            source = csv
            path = %s

            [run]
            seeds = 0
        """ % (tmp_path / "absent.csv")
        path = write_config(tmp_path, body)
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_bad_seed_override_gives_1(self, tmp_path, capsys):
        path = write_config(tmp_path, SMALL_SYNTH)
        assert main(["run", "--config", str(path), "--seed", "zero"]) == 1


class TestVerify:
    def test_verify_emits_report_and_scatter(self, tmp_path, capsys):
        body = """
            [dataset]
            source = synthetic
            scenario = blob_far_gaussian
            n_inlier = 190
            n_outlier = 10
            dim = 6

            [model]
            kind = ae
            hidden = 8

            [stopper]
            epochs = 30
            n_eval = 80

            [run]
            seeds = 0,1
            out = %s
        """ % (tmp_path / "v")
        path = write_config(tmp_path, body)
        assert main(["verify", "--config", str(path)]) == 0
        report = json.loads((tmp_path / "v" / "theorem_report.json").read_text())
        assert report["violations"] == []
        assert report["n_probes"] >= 1
        scatter = (tmp_path / "v" / "theorem_scatter.csv").read_text().splitlines()
        assert scatter[0] == "r_t,threshold,theta_t,R,delta_mean,condition_met"
        assert len(scatter) == report["n_probes"] + 1

    def test_verify_requires_labels(self, tmp_path):
        csv = tmp_path / "plain.csv"
        csv.write_text("a,b\n1,2\n3,4\n5,6\n")
        body = """
            [dataset]
            source = csv
            path = %s

            [run]
            seeds = 0
            out = %s
        """ % (csv, tmp_path / "v")
        path = write_config(tmp_path, body)
        assert main(["verify", "--config", str(path)]) == 2


class TestRunConfigValidation:
    def test_needs_exactly_one_source(self, tmp_path):
        from gradstop.data import SyntheticConfig

        with pytest.raises(ConfigError):
            RunConfig(
                kind="ae", hp=PRESETS["ae"], seeds=(0,), modes=("vanilla",),
                out_dir=tmp_path, csv_path="x.csv",
                synthetic=SyntheticConfig(n_inlier=10, n_outlier=2, d=2),
            )

    def test_needs_seeds(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig(
                kind="ae", hp=PRESETS["ae"], seeds=(), modes=("vanilla",),
                out_dir=tmp_path, csv_path="x.csv",
            )
