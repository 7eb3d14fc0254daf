import json
import math

import numpy as np
import pytest
import yaml

from twistboost import cli
from twistboost.boosting import BoostDiagnostics
from twistboost.data import Column, Dataset, synth_xd6, write_csv
from twistboost.harness import (
    OUTPUT_ENV,
    SCHEMA_VERSION,
    AlgorithmSpec,
    ConfigError,
    ExperimentConfig,
    RunResult,
    emit_results,
    format_table,
    run_and_emit,
    run_experiment,
    t_confidence,
)

TINY = {
    "name": "tiny",
    "seed": 3,
    "dataset": {"kind": "xd6", "m": 120, "seed": 1},
    "split": {"train_fraction": 0.7, "folds": 2},
    "boost": {"T": 6, "tree_depth": 2},
    "twisters": [{"kind": "class_noise", "p": 0.0}, {"kind": "feature_noise", "p": 0.2}],
    "algorithms": [{"name": "adaboost"}, {"name": "pilboost", "alpha": 2.0, "a_f": 4},
                   {"name": "pilboost-adaptive", "a_f": 4}],
}


def _write_cfg(tmp_path, d, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d), encoding="utf-8")
    return p


class TestConfidence:
    def test_hand_computed(self):
        # s = 0.1; with 2 degrees of freedom the quantile has the closed form (2q-1)/sqrt(2q(1-q))
        q = 0.975
        t = (2 * q - 1) / math.sqrt(2 * q * (1 - q))
        assert t_confidence([0.8, 0.9, 1.0]) == pytest.approx(t * 0.1 / math.sqrt(3), rel=1e-9)

    def test_degenerate(self):
        assert math.isnan(t_confidence([0.9]))
        assert t_confidence([0.5, 0.5, 0.5]) == 0.0


class TestConfig:
    def test_from_dict(self):
        cfg = ExperimentConfig.from_dict(TINY)
        assert cfg.T == 6 and cfg.split.folds == 2 and cfg.split.seed == 3
        assert cfg.algorithms[1].label == "pilboost(alpha=2)"
        bc = cfg.boost_config(cfg.algorithms[0])
        assert bc.is_adaboost and bc.T == 6

    @pytest.mark.parametrize("bad", [
        {"algorithms": [{"name": "xgboost"}]},
        {"algorithms": [{"name": "pilboost"}]},
        {"algorithms": [{"name": "pilboost", "alpha": 0.5}]},
        {"algorithms": []},
        {"twisters": []},
        {"twisters": [{"kind": "class_noise", "p": 2.0}]},
        {"boost": {"T": "many"}},
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**TINY, **bad})

    def test_load_yaml_errors(self, tmp_path):
        p = tmp_path / "x.yaml"
        p.write_text("a: [1, 2", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(p)
        p.write_text("- 1\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(p)

    def test_output_resolution(self, monkeypatch):
        cfg = ExperimentConfig.from_dict(TINY)
        monkeypatch.setenv(OUTPUT_ENV, "/tmp/outroot")
        assert str(cfg.resolve_output()) == "/tmp/outroot/tiny"
        assert str(cfg.resolve_output("here")) == "here"
        cfg2 = ExperimentConfig.from_dict({**TINY, "output": "res/x"})
        assert str(cfg2.resolve_output()) == "res/x"

    def test_algorithm_spec(self):
        with pytest.raises(ConfigError):
            AlgorithmSpec("pilboost", 2.0, a_f=0)

    def test_csv_relative_to_config(self, tmp_path):
        ds = synth_xd6(60, 2)
        (tmp_path / "data").mkdir()
        write_csv(ds, tmp_path / "data" / "d.csv", "label")
        (tmp_path / "configs").mkdir()
        schema = [{"name": c.name, "type": "boolean"} for c in ds.columns]
        d = {**TINY, "dataset": {"kind": "csv", "path": "../data/d.csv", "label_column": "label",
                                 "positive_label": "1", "schema": schema}}
        cfg = ExperimentConfig.load(_write_cfg(tmp_path / "configs", d))
        from pathlib import Path
        assert cfg.dataset.load(Path(cfg.base_dir)).equals(ds)


class TestRun:
    def test_separable_toy(self):
        # two well separated clusters, so any training cut generalises
        X = np.concatenate([np.arange(20.0), 100 + np.arange(20.0)])[:, None]
        ds = Dataset(X, np.where(X[:, 0] < 50, -1, 1), (Column("x"),))
        cfg = ExperimentConfig.from_dict({**TINY, "split": {"folds": 1},
                                          "twisters": [{"kind": "class_noise", "p": 0.0}],
                                          "algorithms": [{"name": "adaboost"}]})
        (res,) = run_experiment(cfg, dataset=ds)
        assert res.accuracies == [1.0]
        assert math.isnan(res.ci)

    def test_grid_and_records(self):
        cfg = ExperimentConfig.from_dict(TINY)
        results = run_experiment(cfg)
        assert len(results) == 6
        for r in results:
            assert len(r.accuracies) == 2 and all(0 <= a <= 1 for a in r.accuracies)
            assert not r.partial
            assert sum(r.importance) == pytest.approx(1.0)
        ad = [r for r in results if r.algorithm == "pilboost-adaptive"]
        assert all(len(r.extras["p_hat"]) == 2 for r in ad)

    def test_fold_limit(self):
        cfg = ExperimentConfig.from_dict(TINY)
        assert all(len(r.accuracies) == 1 for r in run_experiment(cfg, folds=1))

    def test_failing_fold_marks_partial(self):
        cfg = ExperimentConfig.from_dict({**TINY, "twisters": [{"kind": "feature_noise", "p": 0.2}],
                                          "algorithms": [{"name": "adaboost"}]})
        X = np.column_stack([np.arange(30.0), np.zeros(30)])
        ds = Dataset(X, np.tile([1, -1], 15), (Column("num"), Column("b", "boolean")))
        (res,) = run_experiment(cfg, dataset=ds)
        assert res.partial and len(res.errors) == 2 and "non-Boolean" in res.errors[0]
        assert res.to_record()["mean"] is None

    def test_diagnostics_summary(self, tmp_path):
        cfg = ExperimentConfig.from_dict({**TINY, "boost": {"T": 4, "tree_depth": 2, "diagnostics": True},
                                          "twisters": [{"kind": "class_noise", "p": 0.0}],
                                          "algorithms": [{"name": "pilboost", "alpha": 2.0}]})
        results = run_experiment(cfg)
        files = emit_results(results, tmp_path)
        diag_files = sorted(k for k in files if k.startswith("diagnostics:"))
        assert len(diag_files) == 2
        d = BoostDiagnostics.from_dict(json.loads(files[diag_files[0]].read_text()))
        assert d.iterations == 4


class TestEmit:
    def _results(self):
        r = RunResult("xd6", "pilboost(alpha=2)", 2.0, 8.0, {"kind": "feature_noise", "p": 0.25},
                      accuracies=[1.0, 0.99], importance=[0.5, 0.5])
        return [r]

    def test_one_record(self, tmp_path):
        files = emit_results(self._results(), tmp_path, feature_names=["a", "b"])
        doc = json.loads(files["results"].read_text())
        assert doc["schema_version"] == SCHEMA_VERSION
        (rec,) = doc["results"]
        assert rec["folds"] == 2 and rec["mean"] == pytest.approx(0.995)
        curves = files["curves"].read_text().splitlines()
        assert curves[0] == "dataset,algorithm,twister,p,mean,ci95,folds"
        assert curves[1].startswith("xd6,pilboost(alpha=2),feature_noise,0.25,0.995,")
        assert files["importance"].read_text().splitlines()[1].endswith(",a,0.5")

    def test_byte_identical(self, tmp_path):
        a = emit_results(self._results(), tmp_path / "a")
        b = emit_results(self._results(), tmp_path / "b")
        for k in ("results", "curves", "importance"):
            assert a[k].read_bytes() == b[k].read_bytes()

    def test_empty(self, tmp_path):
        with pytest.raises(ValueError):
            emit_results([], tmp_path)

    def test_table(self):
        text = format_table(self._results())
        assert "feature_noise p=0.25" in text and "0.995" in text

    def test_run_twice_identical(self, tmp_path):
        cfg = ExperimentConfig.from_dict(TINY)
        _, f1 = run_and_emit(cfg, tmp_path / "r1")
        _, f2 = run_and_emit(cfg, tmp_path / "r2")
        for k in ("results", "curves", "importance"):
            assert f1[k].read_bytes() == f2[k].read_bytes()


class TestCli:
    def test_run(self, tmp_path, capsys):
        p = _write_cfg(tmp_path, TINY)
        assert cli.main(["run", str(p), "--out", str(tmp_path / "o"), "--folds", "1"]) == 0
        assert (tmp_path / "o" / "curves.csv").exists()
        assert "pilboost(alpha=2)" in capsys.readouterr().out

    def test_bad_config_exit_2(self, tmp_path, capsys):
        p = _write_cfg(tmp_path, {**TINY, "algorithms": [{"name": "nope"}]})
        assert cli.main(["run", str(p)]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_file_exit_1(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "none.yaml")]) == 1

    def test_usage_error(self):
        with pytest.raises(SystemExit) as e:
            cli.main([])
        assert e.value.code == 2

    def test_links(self, capsys):
        assert cli.main(["links", "--alpha", "2", "--n", "5"]) == 0
        out = capsys.readouterr().out
        assert "0\t0.5\t0.5" in out

    def test_links_bad_alpha(self):
        assert cli.main(["links", "--alpha", "0.5"]) == 1

    def test_estimate_clean(self, capsys):
        assert cli.main(["estimate-alpha", "xd6"]) == 0
        assert "alpha0: 1\n" in capsys.readouterr().out

    def test_estimate_noisy(self, capsys):
        assert cli.main(["estimate-alpha", "xd6", "--twister", "class_noise:0.2"]) == 0
        out = capsys.readouterr().out
        p = float(out.split("p_hat: ")[1].split()[0])
        assert 0.05 < p < 0.35

    def test_twist(self, tmp_path, capsys):
        out = tmp_path / "t.csv"
        assert cli.main(["twist", "xd6:100:2", "feature_noise:1,1", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 101 and lines[0].startswith("x1,")
        assert "100 changed" in capsys.readouterr().out

    def test_twist_yaml(self, tmp_path):
        tw = tmp_path / "tw.yaml"
        tw.write_text("kind: class_noise\np: 1.0\n", encoding="utf-8")
        assert cli.main(["twist", "xd6:50", str(tw), "--out", str(tmp_path / "t.csv")]) == 0

    def test_certify(self, tmp_path, capsys):
        cfg = {**TINY, "boost": {"T": 5, "tree_depth": 2, "diagnostics": True},
               "twisters": [{"kind": "class_noise", "p": 0.0}],
               "algorithms": [{"name": "pilboost", "alpha": 2.0, "a_f": 1}]}
        p = _write_cfg(tmp_path, cfg)
        assert cli.main(["run", str(p), "--out", str(tmp_path / "o"), "--folds", "1"]) == 0
        (diag,) = (tmp_path / "o" / "diagnostics").glob("*.json")
        capsys.readouterr()
        assert cli.main(["certify", str(diag), "--z-star", "0.05"]) == 0
        cert = json.loads(capsys.readouterr().out)
        assert cert["z_star"] == 0.05 and "Q" in cert
