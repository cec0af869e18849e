"""Integration tests for the CSV scenario and filesystem artifact repositories."""

import json

import numpy as np
import pandas as pd
import pytest

from load_disaggregation.adapters.csv import CsvScenarioRepository
from load_disaggregation.adapters.filesystem import FilesystemArtifactRepository
from load_disaggregation.application.dto.schemas import RegionMetricRow
from load_disaggregation.domain.exceptions import ManifestError, SchemaError
from load_disaggregation.domain.services.cost_model import fit_cost_model


class TestCsvScenarioRepository:
    """Tests for CsvScenarioRepository."""

    @pytest.fixture
    def repository(self):
        return CsvScenarioRepository()

    def test_save_and_load(self, repository, two_region_scenario, tmp_path):
        repository.save(two_region_scenario, tmp_path)
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "agents.csv",
            "regions.csv",
            "substations.csv",
        ]
        assert repository.load(tmp_path) == two_region_scenario

    def test_compressed_files_are_read(self, repository, two_region_scenario, tmp_path):
        repository.save(two_region_scenario, tmp_path)
        frame = pd.read_csv(tmp_path / "agents.csv")
        (tmp_path / "agents.csv").unlink()
        frame.to_csv(tmp_path / "agents.csv.gz", index=False)
        assert repository.load(tmp_path).n_agents == 10

    @pytest.mark.parametrize(
        "column,value,message",
        [
            ("ntl", "bright", "row 3, column 'ntl': not a number"),
            ("ntl", "-2", "row 3, column 'ntl': negative value"),
            ("region_id", "1.5", "row 3, column 'region_id': expected an integer"),
        ],
    )
    def test_schema_errors_name_row_and_column(
        self, repository, two_region_scenario, tmp_path, column, value, message
    ):
        repository.save(two_region_scenario, tmp_path)
        frame = pd.read_csv(tmp_path / "agents.csv", dtype=str)
        frame.loc[2, column] = value
        frame.to_csv(tmp_path / "agents.csv", index=False)
        with pytest.raises(SchemaError) as exc_info:
            repository.load(tmp_path)
        assert exc_info.value.error == "schema_violation"
        assert message in str(exc_info.value)

    def test_missing_column(self, repository, two_region_scenario, tmp_path):
        repository.save(two_region_scenario, tmp_path)
        frame = pd.read_csv(tmp_path / "regions.csv").drop(columns=["area"])
        frame.to_csv(tmp_path / "regions.csv", index=False)
        with pytest.raises(SchemaError, match="missing column"):
            repository.load(tmp_path)

    def test_missing_file(self, repository, tmp_path):
        with pytest.raises(FileNotFoundError):
            repository.load(tmp_path)

    def test_truth_round_trip(self, repository, small_world, tmp_path):
        assert repository.load_truth(tmp_path) is None
        repository.save_truth(tmp_path, small_world.true_demand, small_world.informed_base)
        truth, informed = repository.load_truth(tmp_path)
        np.testing.assert_array_equal(truth.demand, small_world.true_demand.demand)
        np.testing.assert_array_equal(informed.agent_ids, small_world.informed_base.agent_ids)


class TestFilesystemArtifactRepository:
    """Tests for FilesystemArtifactRepository."""

    def test_allocator_round_trip(self, two_region_scenario, tmp_path):
        repository = FilesystemArtifactRepository(tmp_path)
        allocator = fit_cost_model(two_region_scenario, max_epochs=3, seed=4)
        path = repository.save_allocator("model.json", allocator)

        document = json.loads(path.read_text())
        assert document["version"] == 1
        assert document["tau"] == 1.0
        assert len(document["weights"]) == 9
        assert repository.load_allocator("model.json") == allocator

    def test_unknown_allocator_version(self, tmp_path):
        repository = FilesystemArtifactRepository(tmp_path)
        repository.write_json("model.json", {"version": 7})
        with pytest.raises(ManifestError):
            repository.load_allocator("model.json")

    def test_tables_accept_models_and_mappings(self, tmp_path):
        repository = FilesystemArtifactRepository(tmp_path / "nested")
        rows = [RegionMetricRow(method="GPM", region_id=1, rmse=1.5, mae=1.0)]
        path = repository.write_table("metrics.csv", rows)
        frame = pd.read_csv(path)
        assert frame.loc[0, "method"] == "GPM"
        assert frame.loc[0, "rmse"] == 1.5

        repository.write_table("plain.csv", [{"a": 1, "b": 2}])
        assert pd.read_csv(tmp_path / "nested" / "plain.csv").to_dict("records") == [
            {"a": 1, "b": 2}
        ]

    def test_json_is_sorted(self, tmp_path):
        repository = FilesystemArtifactRepository(tmp_path)
        path = repository.write_json("doc.json", {"b": 1, "a": [1, 2]})
        assert path.read_text().index('"a"') < path.read_text().index('"b"')
        assert repository.read_json("doc.json") == {"a": [1, 2], "b": 1}
