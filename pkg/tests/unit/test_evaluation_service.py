"""Unit tests for EvaluationService."""

import numpy as np
import pytest

from load_disaggregation.application.dto.schemas import (
    MethodSummary,
    MetricSummary,
    RegionMetricRow,
)
from load_disaggregation.application.use_cases.evaluation_service import EvaluationService
from load_disaggregation.domain.entities import AgentDemandField, CorrectionFactorField
from load_disaggregation.domain.exceptions import RegionMismatchError
from load_disaggregation.domain.services.correction import correct_multiplicative_renorm
from load_disaggregation.domain.services.partition import aggregate_to_substations, assign_voronoi
from load_disaggregation.domain.services.statistics import spearman
from load_disaggregation.domain.value_objects import FactorKind


def _rows(method: str, rmse: list[float], seed=None, corr=None) -> list[RegionMetricRow]:
    return [
        RegionMetricRow(
            method=method,
            region_id=r,
            seed=seed,
            rmse=value,
            mae=value / 2,
            corr=None if corr is None else corr[r],
        )
        for r, value in enumerate(rmse)
    ]


class TestEvaluationService:
    """Tests for EvaluationService."""

    @pytest.fixture
    def service(self):
        """Evaluation service instance."""
        return EvaluationService()

    def test_region_rows_average_noise_repeats(self, service, two_region_scenario):
        scenario = two_region_scenario
        exact = scenario.substation_demand.copy()
        shifted = exact + 1.0
        rows = service.region_rows("m", [exact, shifted], scenario, seed=4)
        assert [r.region_id for r in rows] == [1, 2]
        assert rows[0].rmse == pytest.approx(0.5)
        assert rows[0].seed == 4
        assert rows[1].corr == pytest.approx(1.0)

    def test_region_rows_restricted_to_test_regions(self, service, two_region_scenario):
        rows = service.region_rows(
            "m", [two_region_scenario.substation_demand], two_region_scenario, region_ids=[2]
        )
        assert [r.region_id for r in rows] == [2]
        assert rows[0].rmse == 0.0

    def test_rmse_and_correlation_can_disagree(self, service, scenario_builder):
        sites = [(0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (15.0, 0.0)]
        scenario = scenario_builder(
            agent_coords=sites,
            agent_regions=[1, 1, 1, 1],
            substation_coords=sites,
            substation_regions=[1, 1, 1, 1],
            region_demand={1: 10.0},
            substation_demand=[1.0, 2.0, 3.0, 4.0],
        )
        base = AgentDemandField(scenario.agent_ids, np.array([1.5, 2.5, 2.5, 3.5]), "base")
        factors = CorrectionFactorField(
            scenario.agent_ids, np.array([1.0, 2.0, 3.0, 4.0]), FactorKind.NTL
        )
        corrected = correct_multiplicative_renorm(base, factors, scenario)

        assignment = assign_voronoi(scenario)
        before = aggregate_to_substations(base, assignment, scenario)
        after = aggregate_to_substations(corrected, assignment, scenario)
        (plain,) = service.region_rows("base", [before], scenario)
        (boosted,) = service.region_rows("base*ntl", [after], scenario)

        assert plain.rmse == pytest.approx(0.5)
        assert boosted.rmse == pytest.approx(0.5843, abs=1e-3)
        assert plain.rmse < boosted.rmse
        assert plain.corr == pytest.approx(3 / np.sqrt(10))
        assert plain.corr < boosted.corr
        actual = scenario.substation_demand
        assert spearman(after, actual) == pytest.approx(1.0)
        assert spearman(before, actual) < 1.0

    def test_seed_average_and_summary(self, service):
        rows = _rows("A", [1.0, 3.0], seed=1) + _rows("A", [3.0, 5.0], seed=2)
        averaged = service.seed_average(rows)
        assert [(r.region_id, r.rmse) for r in averaged] == [(0, 2.0), (1, 4.0)]

        summary = service.summarize(averaged, {"A": False})[0]
        assert summary.conserving is False
        assert summary.rmse.mean == pytest.approx(3.0)
        assert summary.rmse.std == pytest.approx(np.sqrt(2.0))
        assert summary.corr.n == 0
        assert summary.corr.n_missing == 2

    def test_compare_detects_consistent_improvement(self, service):
        rmse_b = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]
        rmse_a = [v - 0.5 - 0.1 * i for i, v in enumerate(rmse_b)]
        rows = []
        for seed in (1, 2):
            rows += _rows("A", rmse_a, seed=seed) + _rows("B", rmse_b, seed=seed)
        results = service.compare(rows, [("A", "B"), ("A", "Missing")])

        assert [r.metric for r in results] == ["rmse", "mae", "corr"]
        rmse = results[0]
        assert rmse.n == 8
        assert rmse.averaged_p == pytest.approx(2 / 256)
        assert rmse.averaged_p_adjusted == pytest.approx(2 / 256)
        assert rmse.per_seed_p == pytest.approx([2 / 256, 2 / 256])
        assert rmse.median_p == pytest.approx(2 / 256)
        assert rmse.averaged_statistic == 0.0
        assert results[2].averaged_p is None
        assert "fewer than 5" in results[2].note

    def test_compare_holm_within_family(self, service):
        base = [float(v) for v in range(1, 9)]
        better = [v - 1.0 for v in base]
        mixed = [v + (0.5 if i % 2 else -0.5) for i, v in enumerate(base)]
        rows = (
            _rows("B", base, seed=1) + _rows("A", better, seed=1) + _rows("C", mixed, seed=1)
        )
        results = service.compare(rows, [("A", "B"), ("C", "B")])
        rmse = [r for r in results if r.metric == "rmse"]
        assert rmse[0].averaged_p_adjusted == pytest.approx(2 * rmse[0].averaged_p)
        assert rmse[1].averaged_p_adjusted >= rmse[1].averaged_p

    def test_identical_methods_are_degenerate(self, service):
        rows = _rows("A", [1.0] * 6, seed=1) + _rows("B", [1.0] * 6, seed=1)
        result = service.compare(rows, [("A", "B")])[0]
        assert result.degenerate
        assert result.averaged_p == 1.0

    def test_marginal_table(self, service):
        averaged = _rows("Uni", [9.0, 11.0]) + _rows("UniN", [10.0, 12.0])
        rows = service.marginal_table(averaged)
        assert len(rows) == 1
        assert rows[0].route == "Uniform post"
        assert rows[0].aux == "NTL"
        assert rows[0].delta == pytest.approx(1.0)
        assert rows[0].percent == pytest.approx(10.0)

    def test_marginal_effect_needs_matching_regions(self, service):
        averaged = _rows("Uni", [9.0, 11.0]) + _rows("UniN", [10.0])
        with pytest.raises(RegionMismatchError):
            service.marginal_effect(averaged, "Uni", "UniN")

    def test_mechanism_table(self, service):
        def summary(method: str, rmse: float) -> MethodSummary:
            metric = MetricSummary(mean=rmse, n=4)
            return MethodSummary(method=method, rmse=metric, mae=metric, corr=MetricSummary())

        summaries = [summary("LRN", 10.0), summary("LRNpostNP", 9.0), summary("LRNrawNP", 14.0)]
        rows = service.mechanism_table(summaries)
        assert [(r.group, r.method) for r in rows] == [
            ("Baseline", "LRN"),
            ("Mult.+renorm", "LRNpostNP"),
            ("No-renorm", "LRNrawNP"),
        ]
        assert rows[2].percent == pytest.approx(40.0)
        assert service.mechanism_table(summaries[:2]) == []

    def test_stratify_counts_every_region(self, service, small_world):
        scenario = small_world.scenario
        averaged = _rows("A", [1.0, 2.0, 3.0, 4.0])
        table = service.stratify(averaged, scenario)
        assert len(table) == 6
        assert sum(row.n for row in table) == 4

    def test_stratify_with_explicit_density_breaks(self, service, two_region_scenario):
        averaged = [
            RegionMetricRow(method="A", region_id=1, rmse=1.0, mae=0.5),
            RegionMetricRow(method="A", region_id=2, rmse=3.0, mae=1.5),
        ]
        occupied = {
            row.density: row.mean_rmse
            for row in service.stratify(averaged, two_region_scenario, (5.0, 8.0))
            if row.n
        }
        assert occupied == {"high": 1.0, "mid": 3.0}

        occupied = {
            row.density
            for row in service.stratify(averaged, two_region_scenario, (0.27, 0.41))
            if row.n
        }
        assert occupied == {"high"}

    def test_build_report_forwards_density_breaks(self, service, two_region_scenario, mocker):
        spy = mocker.spy(service, "stratify")
        rows = [
            RegionMetricRow(method="A", region_id=r, seed=1, rmse=1.0, mae=0.5) for r in (1, 2)
        ]
        report = service.build_report(rows, two_region_scenario, [], density_breaks=(5.0, 8.0))
        assert spy.call_args.args[2] == (5.0, 8.0)
        assert sum(row.n for row in report.strata) == 2

    def test_factor_correlation(self, service, two_region_scenario):
        result = service.factor_correlation(two_region_scenario)
        assert -1.0 <= result.spearman <= 1.0
        assert set(result.per_region_spearman) == {1, 2}
        assert result.densest_region == 1
        assert result.rural_region == 2

    def test_jackknife(self, service, small_world):
        scenario = small_world.scenario
        rng = np.random.default_rng(0)
        predicted = scenario.substation_demand * rng.uniform(0.8, 1.2, scenario.n_substations)
        summary = service.jackknife("m", predicted, scenario, 0)
        assert len(summary.estimates) == 8
        assert summary.minimum == min(summary.estimates)
