"""
End-to-end tests for the command line

A two-test-case grid with short series and small forests keeps every run to
a few seconds.
"""

import pandas as pd
import pytest
import yaml
from click.testing import CliRunner

from core.persistence import read_curve, read_k_sweep, read_manifest, read_ranks
from main import cli
from utils.config import ConfigManager
from utils.logger import init_logger
from tests.test_utils import tiny_grid_specs, write_grid

METHODS = ["C1", "RKI", "Vote", "P(mu,O3,1)"]


@pytest.fixture
def tiny_config(tmp_path, monkeypatch):
    """config.yaml pointing at a tiny grid; the global config is restored afterwards"""
    monkeypatch.setattr("utils.config.config", None)
    grid = write_grid(tmp_path / "grid.json", tiny_grid_specs())
    payload = {
        "synthgen": {
            "grid_path": str(grid),
            "n_series": 4,
            "baseline_len": 120,
            "eval_len": 30,
            "baseline_outbreaks": 2,
            "baseline_start_range": [20, 100],
            "eval_start_range": [120, 140],
        },
        "forest": {"n_trees": 5},
        "experiment": {"seed": 7, "methods": METHODS, "out_dir": str(tmp_path / "default")},
        "logging": {"level": "WARNING", "console": {"enabled": False}, "file": {"enabled": False}},
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(payload))
    yield path
    init_logger(ConfigManager(), force=True)


def invoke(config_path, *args):
    return CliRunner().invoke(cli, ["--config", str(config_path), *args])


class TestExperiment:
    """Whole-pipeline runs"""

    def test_experiment_writes_ranks(self, tiny_config, tmp_path):
        out = tmp_path / "run"
        result = invoke(tiny_config, "experiment", "--out", str(out))
        assert result.exit_code == 0, result.output

        ranks = read_ranks(out / "results" / "ranks.csv")
        assert list(ranks.columns) == ["method", "subset", "avg_rank"]
        assert ranks["method"].unique().tolist() == METHODS
        assert ranks["subset"].unique().tolist() == ["overall", "~T,~S1,~S2", "~T,S1,~S2"]

        results = pd.read_csv(out / "results" / "results.csv")
        assert list(results.columns) == ["test_case", "method", "dauc_1pct", "pauc_1pct"]
        assert len(results) == 2 * len(METHODS)
        assert results["dauc_1pct"].between(0, 1).all()

        for stage in ("generate", "detect", "dataset", "train", "evaluate", "rank"):
            manifest = read_manifest(out, stage)
            assert manifest.seed == 7
            assert len(manifest.config_hash) == 64

        assert (out / "models" / "P_mu_O3_w1" / "tc07.json").exists()
        curves = read_curve(out / "results" / "curves" / "tc00_detection.csv")
        assert list(curves.columns) == ["method", "x", "y"]

    def test_reruns_are_byte_identical(self, tiny_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert invoke(tiny_config, "experiment", "--out", str(a)).exit_code == 0
        assert invoke(tiny_config, "experiment", "--out", str(b)).exit_code == 0
        for rel in ("results/results.csv", "results/ranks.csv", "bundles/tc00.csv", "pvalues/tc07.csv"):
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

        # a single stage rerun rewrites the same results
        before = (a / "results" / "results.csv").read_bytes()
        assert invoke(tiny_config, "evaluate", "--out", str(a)).exit_code == 0
        assert (a / "results" / "results.csv").read_bytes() == before

    def test_parallel_units_match_serial(self, tiny_config, tmp_path):
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        assert invoke(tiny_config, "experiment", "--out", str(serial)).exit_code == 0
        assert invoke(tiny_config, "experiment", "--out", str(parallel), "--jobs", "2").exit_code == 0
        assert (serial / "results" / "results.csv").read_bytes() == (parallel / "results" / "results.csv").read_bytes()

    def test_seed_changes_results(self, tiny_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert invoke(tiny_config, "generate", "--out", str(a), "--seed", "1").exit_code == 0
        assert invoke(tiny_config, "generate", "--out", str(b), "--seed", "2").exit_code == 0
        assert (a / "bundles" / "tc00.csv").read_bytes() != (b / "bundles" / "tc00.csv").read_bytes()

    def test_k_sweep(self, tiny_config, tmp_path):
        out = tmp_path / "sweep"
        result = invoke(tiny_config, "experiment", "--out", str(out), "--methods", "C1,RKI", "--k-sweep", "3")
        assert result.exit_code == 0, result.output
        sweep = read_k_sweep(out / "results" / "k_sweep.csv")
        assert list(sweep.columns)[:3] == ["method", "k", "test_case"]
        assert set(sweep["k"]) == {3}
        assert (out / "k_3" / "results" / "results.csv").exists()

    def test_single_test_case(self, tiny_config, tmp_path):
        out = tmp_path / "one"
        assert invoke(tiny_config, "generate", "--out", str(out), "--test-cases", "7").exit_code == 0
        assert (out / "bundles" / "tc07.csv").exists()
        assert not (out / "bundles" / "tc00.csv").exists()


class TestExitCodes:
    """0 success, 1 usage error, 2 data or configuration error"""

    def test_unknown_option(self, tiny_config):
        assert invoke(tiny_config, "generate", "--bogus").exit_code == 1

    def test_unknown_command(self, tiny_config):
        assert invoke(tiny_config, "plot").exit_code == 1

    def test_bad_k_mode(self, tiny_config, tmp_path):
        assert invoke(tiny_config, "generate", "--out", str(tmp_path), "--k", "sometimes").exit_code == 2

    @pytest.mark.parametrize("methods", ["CUSUM", "P(mu,O9,1)"])
    def test_bad_methods(self, tiny_config, tmp_path, methods):
        assert invoke(tiny_config, "generate", "--out", str(tmp_path), "--methods", methods).exit_code == 2

    def test_missing_stage_inputs(self, tiny_config, tmp_path):
        result = invoke(tiny_config, "detect", "--out", str(tmp_path / "empty"))
        assert result.exit_code == 2
        assert "Missing input" in result.output

    def test_missing_grid(self, tiny_config, tmp_path):
        result = invoke(tiny_config, "generate", "--out", str(tmp_path), "--grid", str(tmp_path / "none.json"))
        assert result.exit_code == 2

    def test_corrupt_stage_input(self, tiny_config, tmp_path):
        out = tmp_path / "run"
        assert invoke(tiny_config, "generate", "--out", str(out)).exit_code == 0
        (out / "bundles" / "tc00.json").write_text("{not json")
        result = invoke(tiny_config, "detect", "--out", str(out))
        assert result.exit_code == 2
        assert "Schema mismatch" in result.output

    def test_unexpected_exception(self, tiny_config, tmp_path, monkeypatch):
        def fail(self):
            raise RuntimeError("disk full")

        monkeypatch.setattr("main.ExperimentRunner.generate", fail)
        result = invoke(tiny_config, "generate", "--out", str(tmp_path))
        assert result.exit_code == 2
        assert "RuntimeError" in result.output
        assert "disk full" in result.output

    def test_help(self):
        result = CliRunner().invoke(cli, ["--help"])
        assert result.exit_code == 0
        assert "experiment" in result.output
