"""Unit tests for Voronoi partitioning and aggregation."""

import numpy as np
import pytest

from load_disaggregation.domain.entities import AgentDemandField
from load_disaggregation.domain.exceptions import FieldValidationError
from load_disaggregation.domain.services.partition import (
    aggregate_to_substations,
    assign_voronoi,
    is_rci,
    rci_mask,
)
from load_disaggregation.domain.services.weighting import weight_uniform


class TestRci:
    """Tests for the RCI classification."""

    def test_mask_matches_per_agent_predicate(self, two_region_scenario):
        mask = rci_mask(two_region_scenario)
        assert mask.tolist() == [is_rci(a) for a in two_region_scenario.agents]
        assert mask.tolist() == [True, True, True, False, True, False, True, False, True, False]


class TestAssignVoronoi:
    """Tests for nearest-substation assignment."""

    def test_nearest_same_region_substation(self, two_region_scenario):
        assignment = assign_voronoi(two_region_scenario)
        assert assignment.substation_ids.tolist() == [
            101, 101, 101, 102, 101, 102, 103, 104, 103, 105,
        ]  # fmt: skip

    def test_tie_goes_to_lowest_substation_id(self, scenario_builder):
        scenario = scenario_builder(
            agent_coords=[(0.0, 0.0)],
            agent_regions=[1],
            substation_coords=[(-1.0, 0.0), (1.0, 0.0)],
            substation_regions=[1, 1],
            substation_ids=[7, 3],
        )
        assert assign_voronoi(scenario).agent_to_substation == {1: 3}

    def test_closer_substation_in_other_region_is_ignored(self, scenario_builder):
        """Test that cells never cross region borders."""
        scenario = scenario_builder(
            agent_coords=[(0.0, 0.0), (5.0, 0.0)],
            agent_regions=[1, 2],
            substation_coords=[(10.0, 0.0), (0.1, 0.0)],
            substation_regions=[1, 2],
        )
        assert assign_voronoi(scenario).substation_ids.tolist() == [101, 102]


class TestAggregate:
    """Tests for substation aggregation."""

    def test_uniform_cell_sums(self, two_region_scenario):
        assignment = assign_voronoi(two_region_scenario)
        totals = aggregate_to_substations(
            weight_uniform(two_region_scenario), assignment, two_region_scenario
        )
        np.testing.assert_allclose(totals, [40 / 6, 20 / 6, 3.0, 1.5, 1.5])
        assert totals.sum() == pytest.approx(16.0)

    def test_empty_cell_gets_zero(self, scenario_builder):
        scenario = scenario_builder(
            agent_coords=[(0.0, 0.0), (0.5, 0.0)],
            agent_regions=[1, 1],
            substation_coords=[(0.0, 0.0), (50.0, 50.0)],
            substation_regions=[1, 1],
        )
        totals = aggregate_to_substations(np.array([2.0, 3.0]), assign_voronoi(scenario), scenario)
        np.testing.assert_allclose(totals, [5.0, 0.0])

    def test_field_order_does_not_matter(self, two_region_scenario):
        scenario = two_region_scenario
        demand = np.arange(1.0, 11.0)
        forward = AgentDemandField(scenario.agent_ids, demand, "x")
        backward = AgentDemandField(scenario.agent_ids[::-1], demand[::-1], "x")
        assignment = assign_voronoi(scenario)
        np.testing.assert_array_equal(
            aggregate_to_substations(forward, assignment, scenario),
            aggregate_to_substations(backward, assignment, scenario),
        )

    def test_wrong_length_rejected(self, two_region_scenario):
        assignment = assign_voronoi(two_region_scenario)
        with pytest.raises(FieldValidationError):
            aggregate_to_substations(np.ones(3), assignment, two_region_scenario)

    def test_negative_array_rejected(self, two_region_scenario):
        assignment = assign_voronoi(two_region_scenario)
        demand = np.ones(two_region_scenario.n_agents)
        demand[3] = -0.5
        with pytest.raises(FieldValidationError, match="non-negative"):
            aggregate_to_substations(demand, assignment, two_region_scenario)
