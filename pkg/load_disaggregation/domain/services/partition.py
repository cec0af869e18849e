"""Voronoi partitioning and substation aggregation."""

import numpy as np

from load_disaggregation.domain.entities import (
    Agent,
    AgentDemandField,
    Scenario,
    VoronoiAssignment,
    reindex,
)
from load_disaggregation.domain.exceptions import FieldValidationError, ScenarioValidationError
from load_disaggregation.domain.value_objects import RCI_CLASSES


def is_rci(agent: Agent) -> bool:
    """True when the agent's dominant land-use class is residential, commercial or industrial."""
    return agent.dominant_class in RCI_CLASSES


def rci_mask(scenario: Scenario) -> np.ndarray:
    """Vectorized ``is_rci`` over the scenario's agents."""
    # np.argmax returns the first maximum, i.e. the lowest class index on ties.
    dominant = np.argmax(scenario.landuse, axis=1)
    return np.isin(dominant, [int(c) for c in RCI_CLASSES])


def assign_voronoi(scenario: Scenario) -> VoronoiAssignment:
    """Assign each agent to its nearest same-region substation.

    Distance ties go to the lowest substation id.
    """
    assigned = np.empty(scenario.n_agents, dtype=np.int64)
    for region_id in scenario.region_ids.tolist():
        agent_idx = scenario.region_agent_indices(region_id)
        sub_idx = scenario.region_substation_indices(region_id)
        if len(sub_idx) == 0:
            raise ScenarioValidationError(f"Region {region_id} has no substations")
        # lowest id first so argmin's first-hit rule implements the tie-break
        sub_idx = sub_idx[np.argsort(scenario.substation_ids[sub_idx], kind="stable")]
        delta = (
            scenario.agent_coords[agent_idx, None, :] - scenario.substation_coords[None, sub_idx, :]
        )
        distance = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta))
        assigned[agent_idx] = scenario.substation_ids[sub_idx[np.argmin(distance, axis=1)]]
    return VoronoiAssignment(scenario.agent_ids, assigned)


def aggregate_to_substations(
    agent_demands: AgentDemandField | np.ndarray,
    assignment: VoronoiAssignment,
    scenario: Scenario,
) -> np.ndarray:
    """Sum agent demands per Voronoi cell; result aligned with ``scenario.substation_ids``.

    Substations with empty cells receive 0.
    """
    if isinstance(agent_demands, AgentDemandField):
        demand = agent_demands.aligned(scenario)
    else:
        demand = np.asarray(agent_demands, dtype=float)
        if demand.shape != (scenario.n_agents,):
            raise FieldValidationError(
                f"Expected {scenario.n_agents} agent demands, got {demand.shape[0]}"
            )
        if np.any(demand < 0):
            raise FieldValidationError("Agent demands must be non-negative")
    if not np.all(np.isfinite(demand)):
        raise FieldValidationError("Agent demands must be finite")

    target = reindex(assignment.agent_ids, assignment.substation_ids, scenario.agent_ids)
    position = {int(s): i for i, s in enumerate(scenario.substation_ids)}
    cell = np.fromiter((position[int(s)] for s in target), dtype=np.int64, count=len(target))
    return np.bincount(cell, weights=demand, minlength=scenario.n_substations)
