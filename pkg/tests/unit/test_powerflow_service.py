"""Unit tests for PowerFlowService."""

import math

import numpy as np
import pytest

from load_disaggregation.application.dto.schemas import PowerFlowConfig
from load_disaggregation.application.use_cases.powerflow_service import (
    REFERENCE_LABEL,
    PowerFlowService,
    smallest_region,
)
from load_disaggregation.domain.exceptions import KeyMismatchError
from load_disaggregation.domain.services.partition import aggregate_to_substations, assign_voronoi
from load_disaggregation.domain.services.weighting import weight_uniform


@pytest.fixture
def feeder(scenario_builder):
    """One region with four substations on a straight 15 km line."""
    return scenario_builder(
        agent_coords=[(0.0, 1.0), (15.0, 1.0)],
        agent_regions=[1, 1],
        substation_coords=[(0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (15.0, 0.0)],
        substation_regions=[1, 1, 1, 1],
        region_demand={1: 40.0},
        substation_demand=[10.0, 10.0, 10.0, 10.0],
    )


class TestPowerFlowService:
    """Tests for PowerFlowService."""

    @pytest.fixture
    def service(self):
        """Power-flow service instance."""
        return PowerFlowService()

    def test_smallest_region_ties_to_lowest_id(self, two_region_scenario, scenario_builder):
        assert smallest_region(two_region_scenario) == 1
        tied = scenario_builder(
            agent_coords=[(0.0, 0.0), (9.0, 9.0)],
            agent_regions=[4, 2],
            substation_coords=[(0.0, 0.0), (9.0, 9.0)],
            substation_regions=[4, 2],
        )
        assert smallest_region(tied) == 2

    def test_network_for_region(self, service, two_region_scenario):
        network = service.network_for(two_region_scenario, PowerFlowConfig(region_id=2))
        assert network.load_bus_ids == (103, 104, 105)
        assert network.n_lines == 3
        with pytest.raises(KeyMismatchError):
            service.network_for(two_region_scenario, PowerFlowConfig(region_id=9))

    def test_power_factor_split(self, service, feeder, mocker):
        solve = mocker.patch(
            "load_disaggregation.application.use_cases.powerflow_service.solve_ac"
        )
        network = service.network_for(feeder, PowerFlowConfig())
        service.solve(network, feeder, np.array([10.0, 20.0, 30.0, 40.0]), 0.8)
        _, p, q = solve.call_args.args
        np.testing.assert_allclose(p, [8.0, 16.0, 24.0, 32.0])
        np.testing.assert_allclose(q, np.array([8.0, 16.0, 24.0, 32.0]) * 0.75)

    def test_validate_against_recorded_demand(self, service, feeder):
        predictions = {
            "exact": feeder.substation_demand.copy(),
            "remote": np.array([5.0, 5.0, 5.0, 25.0]),
        }
        config = PowerFlowConfig(methods=("exact", "remote", "absent"))
        report, solutions = service.validate(feeder, predictions, config)

        assert report.region_id == 1
        assert report.n_buses == 5
        assert [row.method for row in report.rows] == [REFERENCE_LABEL, "exact", "remote"]
        reference, exact, remote = report.rows
        assert reference.delta_mae_pp == 0.0
        assert exact.delta_mae_pp == pytest.approx(0.0, abs=1e-9)
        assert remote.delta_mae_pp > 0
        assert remote.max_loading_pct > reference.max_loading_pct
        assert all(row.converged for row in report.rows)
        assert "absent" not in solutions

        # the remote-end line carries 25 MVA instead of 10
        last = solutions["remote"].current_ka[-1] / solutions[REFERENCE_LABEL].current_ka[-1]
        assert last == pytest.approx(2.5, rel=0.05)

    def test_reference_loading_magnitude(self, service, feeder):
        report, solutions = service.validate(feeder, {}, PowerFlowConfig(methods=()))
        line = PowerFlowConfig().line.to_domain()
        # 10 MVA at about 1 p.u. on the last span
        expected = 10.0 / (math.sqrt(3) * 110.0) / line.rating_ka * 100.0
        assert solutions[REFERENCE_LABEL].loading_pct[-1] == pytest.approx(expected, rel=0.05)
        assert len(report.rows) == 1

    def test_flat_allocation_under_reports_peak_loading(self, service, scenario_builder):
        sites = [(0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (25.0, 0.0)]
        scenario = scenario_builder(
            agent_coords=sites,
            agent_regions=[1, 1, 1, 1],
            substation_coords=sites,
            substation_regions=[1, 1, 1, 1],
            region_demand={1: 40.0},
            substation_demand=[2.0, 2.0, 2.0, 34.0],
        )
        flat = aggregate_to_substations(
            weight_uniform(scenario), assign_voronoi(scenario), scenario
        )
        np.testing.assert_allclose(flat, 10.0)

        report, solutions = service.validate(
            scenario, {"Uni": flat}, PowerFlowConfig(methods=("Uni",))
        )
        reference, uniform = report.rows
        assert reference.method == REFERENCE_LABEL
        assert uniform.max_loading_pct - reference.max_loading_pct < 0
        assert uniform.delta_mae_pp > 0
        # the long span to the heavy far node is where the flat split errs most
        errors = np.abs(solutions["Uni"].loading_pct - solutions[REFERENCE_LABEL].loading_pct)
        lengths = solutions[REFERENCE_LABEL].network.lengths_km
        assert int(np.argmax(errors)) == int(np.argmax(lengths))
