"""CLI: commands, config/flag merging, exit codes, manifests, determinism."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from respdens.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def read_manifest(path):
    with open(path / "manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


class TestSimulate:
    def test_basic_and_deterministic(self, runner, tmp_path):
        hashes = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            res = runner.invoke(main, ["simulate", "--scenario", "uniform-linear",
                                       "--n", "100", "--seed", "42",
                                       "--out", str(out)])
            assert res.exit_code == 0, res.output
            man = read_manifest(out)
            hashes.append({a["file"]: a["sha256"] for a in man["artifacts"]})
        assert hashes[0] == hashes[1]
        table = np.loadtxt(tmp_path / "a" / "dataset.csv", delimiter=",",
                           skiprows=1)
        assert table.shape == (100, 2)

    def test_oracle_columns(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", "--scenario", "uniform-linear",
                                   "--n", "20", "--seed", "1", "--oracle",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 0
        header = (tmp_path / "dataset.csv").read_text().splitlines()[0]
        assert header == "x,y,eps,r_x"

    def test_unknown_scenario_exit_2(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", "--scenario", "mystery",
                                   "--n", "10", "--seed", "1",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 2
        assert "uniform-linear" in res.output  # lists the built-ins

    def test_missing_seed_exit_2(self, runner, tmp_path):
        res = runner.invoke(main, ["simulate", "--scenario", "uniform-linear",
                                   "--n", "10", "--out", str(tmp_path)])
        assert res.exit_code == 2
        assert "seed" in res.output


class TestConfigMerging:
    def test_json_config_with_flag_override(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scenario": "uniform-linear", "n": 30,
                                   "seed": 5, "out": str(tmp_path / "o1")}))
        res = runner.invoke(main, ["simulate", "--config", str(cfg)])
        assert res.exit_code == 0
        res = runner.invoke(main, ["simulate", "--config", str(cfg),
                                   "--n", "40", "--out", str(tmp_path / "o2")])
        assert res.exit_code == 0
        rows = (tmp_path / "o2" / "dataset.csv").read_text().count("\n") - 1
        assert rows == 40

    def test_invalid_config_document(self, runner, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("[1, 2, 3]")
        res = runner.invoke(main, ["simulate", "--config", str(cfg)])
        assert res.exit_code == 2


class TestEstimate:
    def test_pipeline_outputs(self, runner, tmp_path):
        res = runner.invoke(main, ["estimate", "--scenario", "uniform-linear",
                                   "--n", "300", "--seed", "7",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        for name in ("f_hat.csv", "q_hat.csv", "h_hat.csv", "metadata.json",
                     "estimate.svg", "manifest.json"):
            assert (tmp_path / name).exists()
        meta = json.loads((tmp_path / "metadata.json").read_text())
        assert abs(meta["h_integral"] - 1.0) < 1e-6

    def test_paths_agree(self, runner, tmp_path):
        vals = {}
        for path in ("direct", "fft"):
            out = tmp_path / path
            res = runner.invoke(main, ["estimate", "--scenario",
                                       "uniform-linear", "--n", "200",
                                       "--seed", "3", "--path", path,
                                       "--grid-size", "101",
                                       "--out", str(out)])
            assert res.exit_code == 0, res.output
            table = np.loadtxt(out / "h_hat.csv", delimiter=",", skiprows=1)
            vals[path] = table[:, 1]
        diff = np.max(np.abs(vals["direct"] - vals["fft"]))
        assert diff < 1e-4 * np.max(np.abs(vals["direct"]))

    def test_efficient_flag(self, runner, tmp_path):
        res = runner.invoke(main, ["estimate", "--scenario", "uniform-linear",
                                   "--n", "300", "--seed", "7", "--efficient",
                                   "--score-const", "0.12",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        assert (tmp_path / "correction.csv").exists()
        assert (tmp_path / "h_corrected.csv").exists()
        meta = json.loads((tmp_path / "metadata.json").read_text())
        assert "near_normal" in meta and "fisher_info" in meta

    def test_external_dataset(self, runner, tmp_path):
        sim = tmp_path / "sim"
        runner.invoke(main, ["simulate", "--scenario", "uniform-linear",
                             "--n", "200", "--seed", "9", "--out", str(sim)])
        res = runner.invoke(main, ["estimate", "--data",
                                   str(sim / "dataset.csv"),
                                   "--out", str(tmp_path / "est")])
        assert res.exit_code == 0, res.output


class TestRates:
    def test_small_run_and_rerun_hashes(self, runner, tmp_path):
        args = ["rates", "--scenario", "uniform-linear",
                "--ns", "200,400,800,1600", "--reps", "3", "--seed", "2",
                "--estimators", "baseline", "--workers", "2"]
        manifests = []
        for sub in ("r1", "r2"):
            res = runner.invoke(main, args + ["--out", str(tmp_path / sub)])
            assert res.exit_code == 0, res.output
            man = read_manifest(tmp_path / sub)
            manifests.append({a["file"]: a["sha256"] for a in man["artifacts"]})
        assert manifests[0] == manifests[1]
        report = json.loads((tmp_path / "r1" / "rate_report.json").read_text())
        assert "baseline" in report and "slope" in report["baseline"]

    def test_requires_four_sizes(self, runner, tmp_path):
        res = runner.invoke(main, ["rates", "--scenario", "uniform-linear",
                                   "--ns", "200,400,800", "--reps", "2",
                                   "--seed", "2", "--out", str(tmp_path)])
        assert res.exit_code == 2

    def test_rejects_unsorted_ns(self, runner, tmp_path):
        res = runner.invoke(main, ["rates", "--scenario", "uniform-linear",
                                   "--ns", "400,200,800,1600", "--reps", "2",
                                   "--seed", "2", "--out", str(tmp_path)])
        assert res.exit_code == 2


class TestEfficiencyAndCovariance:
    def test_efficiency_summary(self, runner, tmp_path):
        res = runner.invoke(main, ["efficiency", "--scenario",
                                   "uniform-logistic", "--n", "400",
                                   "--reps", "4", "--seed", "6",
                                   "--y0", "0.8", "--score-const", "0.16",
                                   "--workers", "2", "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        summary = json.loads((tmp_path / "efficiency.json").read_text())
        assert summary["fisher_true"] == pytest.approx(1 / 3)
        assert summary["var_influence_projected"] <= summary["var_influence"]

    def test_covariance_with_mc(self, runner, tmp_path):
        res = runner.invoke(main, ["covariance", "--scenario",
                                   "uniform-linear", "--points", "9",
                                   "--mc-draws", "20000", "--seed", "3",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        summary = json.loads((tmp_path / "covariance.json").read_text())
        assert summary["mc_max_abs_diff"] < 0.02
        table = np.loadtxt(tmp_path / "gamma.csv", delimiter=",", skiprows=1)
        mat = table[:, 1:]
        assert np.max(np.abs(mat - mat.T)) < 1e-12


class TestCheck:
    def test_passes_and_schema(self, runner, tmp_path):
        import importlib.resources as resources

        import jsonschema

        res = runner.invoke(main, ["check", "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
        report = json.loads((tmp_path / "check_report.json").read_text())
        assert report["passed"]
        schema = json.loads(
            resources.files("respdens").joinpath(
                "schemas/check_report.schema.json").read_text())
        jsonschema.validate(report, schema)

    def test_fault_injection_names_moment2(self, runner, tmp_path):
        res = runner.invoke(main, ["check", "--inject", "kernel-moment2",
                                   "--out", str(tmp_path)])
        assert res.exit_code == 4
        assert "invariant failure: kernel.order3.moment2" in res.output

    def test_manifest_verification(self, runner, tmp_path):
        sim = tmp_path / "sim"
        runner.invoke(main, ["simulate", "--scenario", "uniform-linear",
                             "--n", "20", "--seed", "1", "--out", str(sim)])
        res = runner.invoke(main, ["check", "--manifest",
                                   str(sim / "manifest.json"),
                                   "--out", str(tmp_path / "chk")])
        assert res.exit_code == 0, res.output
        # corrupt an artifact: hash check must fail
        with open(sim / "dataset.csv", "a", encoding="utf-8") as fh:
            fh.write("tampered\n")
        res = runner.invoke(main, ["check", "--manifest",
                                   str(sim / "manifest.json"),
                                   "--out", str(tmp_path / "chk2")])
        assert res.exit_code == 4
        assert "manifest.hashes" in res.output
