"""End-to-end tests of the command-line interface."""

import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from load_disaggregation.adapters.csv import CsvScenarioRepository
from load_disaggregation.cli import EXIT_RUNTIME, EXIT_VALIDATION, app

TINY_SYNTHETIC = {
    "seed": 5,
    "n_regions": 4,
    "agents_per_region": 40,
    "substations_per_region": 6,
    "region_size_km": 5.0,
    "cluster_width_km": 1.0,
}


def write_manifest(path, **overrides):
    document = {
        "synthetic": TINY_SYNTHETIC,
        "plan": {"seeds": [1], "n_folds": 2},
        "train": {"max_epochs": 5},
        "methods": ["Uni", "GPM", "LRN", "LRNpostNP", "LRNpriorN"],
        "comparisons": [["LRN", "GPM"], ["LRNpostNP", "LRN"]],
        "workers": 1,
    }
    document.update(overrides)
    path.write_text(yaml.safe_dump(document))
    return path


@pytest.fixture
def runner():
    return CliRunner()


class TestGenerate:
    """Tests for the generate command."""

    def test_generation_is_reproducible(self, runner, tmp_path):
        config = tmp_path / "synth.yaml"
        config.write_text(yaml.safe_dump(TINY_SYNTHETIC))

        for name in ("a", "b"):
            result = runner.invoke(
                app, ["generate", "--config", str(config), "--out", str(tmp_path / name)]
            )
            assert result.exit_code == 0, result.output
            assert "Agents: 160" in result.output

        for file in ("regions.csv", "agents.csv", "substations.csv", "synthetic.csv"):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()

    def test_seed_override(self, runner, tmp_path):
        config = tmp_path / "synth.yaml"
        config.write_text(yaml.safe_dump(TINY_SYNTHETIC))
        result = runner.invoke(
            app,
            [
                "generate", "--config", str(config), "--seed", "9", "--n-regions", "2",
                "--out", str(tmp_path / "scenario"),
            ],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        stored = json.loads((tmp_path / "scenario" / "synth_config.json").read_text())
        assert stored["seed"] == 9
        assert stored["n_regions"] == 2

    def test_invalid_config_exits_with_validation_code(self, runner, tmp_path):
        config = tmp_path / "synth.yaml"
        config.write_text(yaml.safe_dump({"agents_per_region": 2, "substations_per_region": 5}))
        result = runner.invoke(app, ["generate", "--config", str(config), "--out", str(tmp_path)])
        assert result.exit_code == EXIT_VALIDATION
        assert "Error:" in result.output


class TestExperimentCommands:
    """Tests for evaluate, sweep, powerflow and report on a tiny synthetic manifest."""

    def test_evaluate_then_report(self, runner, tmp_path):
        manifest = write_manifest(tmp_path / "manifest.yaml")
        out = tmp_path / "run"

        result = runner.invoke(app, ["evaluate", "--manifest", str(manifest), "--out", str(out)])
        assert result.exit_code == 0, result.output
        for name in (
            "eval_report.json",
            "region_metrics.csv",
            "seed_metrics.csv",
            "summary.csv",
            "comparisons.csv",
            "predictions.csv",
            "audit.json",
            "report.txt",
        ):
            assert (out / name).exists(), name

        report = json.loads((out / "eval_report.json").read_text())
        assert {m["method"] for m in report["methods"]} == {
            "Uni", "GPM", "LRN", "LRNpostNP", "LRNpriorN",
        }  # fmt: skip
        assert len(report["regions"]) == 5 * 4

        result = runner.invoke(app, ["report", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "Method matrix" in result.output

    def test_evaluate_and_report_are_byte_identical_on_rerun(self, runner, tmp_path):
        manifest = write_manifest(tmp_path / "manifest.yaml")
        runs = [tmp_path / "first", tmp_path / "second"]
        for out in runs:
            for command in (["evaluate", "--manifest", str(manifest)], ["report"]):
                result = runner.invoke(app, [*command, "--out", str(out)])
                assert result.exit_code == 0, result.output

        names = sorted(path.name for path in runs[0].iterdir())
        assert names == sorted(path.name for path in runs[1].iterdir())
        assert "report.txt" in names
        for name in names:
            assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes(), name

    def test_sweep_single_axis(self, runner, tmp_path):
        manifest = write_manifest(tmp_path / "manifest.yaml")
        out = tmp_path / "run"
        result = runner.invoke(
            app, ["sweep", "--manifest", str(manifest), "--axis", "alpha", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert (out / "sweep_alpha.csv").exists()
        assert not (out / "sweep_gamma.json").exists()
        rows = json.loads((out / "sweep_alpha.json").read_text())["rows"]
        levels = {row["level"] for row in rows}
        assert levels == {0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0}

    def test_powerflow(self, runner, tmp_path):
        manifest = write_manifest(
            tmp_path / "manifest.yaml", powerflow={"methods": ["Uni", "GPM", "LRN"]}
        )
        out = tmp_path / "run"
        result = runner.invoke(app, ["powerflow", "--manifest", str(manifest), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "True load" in result.output

        report = json.loads((out / "powerflow.json").read_text())
        methods = {row["method"] for row in report["rows"]}
        assert {"True load", "Uni", "GPM", "LRN"} <= methods
        network = json.loads((out / "network.json").read_text())
        assert len(network["edges"]) == 6

    def test_train_from_scenario_directory(self, runner, tmp_path):
        scenario_dir = tmp_path / "scenario"
        config = tmp_path / "synth.yaml"
        config.write_text(yaml.safe_dump(TINY_SYNTHETIC))
        assert runner.invoke(
            app, ["generate", "--config", str(config), "--out", str(scenario_dir)]
        ).exit_code == 0

        out = tmp_path / "model"
        result = runner.invoke(
            app,
            [
                "train", "--scenario", str(scenario_dir), "--lambda-ntl", "0.1",
                "--seed", "3", "--out", str(out),
            ],
        )  # fmt: skip
        assert result.exit_code == 0, result.output
        model = json.loads((out / "model.json").read_text())
        assert model["lambda_ntl"] == 0.1
        assert model["seed"] == 3
        assert (out / "loss_trace.csv").exists()

    def test_train_needs_exactly_one_source(self, runner, tmp_path):
        result = runner.invoke(app, ["train", "--out", str(tmp_path)])
        assert result.exit_code == 2
        assert "exactly one" in result.output


class TestExitCodes:
    """Tests for the stable exit codes."""

    def test_manifest_without_methods(self, runner, tmp_path):
        manifest = write_manifest(tmp_path / "manifest.yaml", methods=[])
        result = runner.invoke(app, ["evaluate", "--manifest", str(manifest)])
        assert result.exit_code == EXIT_VALIDATION
        assert "Error:" in result.output

    def test_informed_base_needs_truth(self, runner, tmp_path, two_region_scenario):
        CsvScenarioRepository().save(two_region_scenario, tmp_path / "scenario")
        manifest = write_manifest(
            tmp_path / "manifest.yaml",
            synthetic=None,
            scenario="scenario",
            learned_base="informed",
            methods=["GPM", "LRN"],
        )
        result = runner.invoke(
            app, ["evaluate", "--manifest", str(manifest), "--out", str(tmp_path / "run")]
        )
        assert result.exit_code == EXIT_VALIDATION
        assert "informed" in result.output

    def test_degenerate_radiance_is_a_runtime_failure(self, runner, tmp_path, scenario_builder):
        scenario = scenario_builder(
            agent_coords=[(0.0, 0.0), (1.0, 0.0), (5.0, 5.0), (6.0, 5.0)],
            agent_regions=[1, 1, 2, 2],
            substation_coords=[(0.5, 0.0), (5.5, 5.0)],
            substation_regions=[1, 2],
            ntl=list(np.zeros(4)),
        )
        CsvScenarioRepository().save(scenario, tmp_path / "scenario")
        manifest = write_manifest(
            tmp_path / "manifest.yaml",
            synthetic=None,
            scenario="scenario",
            methods=["UniN"],
            comparisons=[],
        )
        result = runner.invoke(
            app, ["evaluate", "--manifest", str(manifest), "--out", str(tmp_path / "run")]
        )
        assert result.exit_code == EXIT_RUNTIME
        assert "degenerate_field" in result.output

    def test_missing_manifest_is_a_usage_error(self, runner, tmp_path):
        result = runner.invoke(app, ["evaluate", "--manifest", str(tmp_path / "absent.yaml")])
        assert result.exit_code == 2
