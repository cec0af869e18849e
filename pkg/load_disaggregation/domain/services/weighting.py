"""Base demand weighting: Uniform, GPM and externally supplied allocation weights."""

import logging

import numpy as np

from load_disaggregation.domain.entities import (
    AgentDemandField,
    AllocationWeights,
    Scenario,
    reindex,
)
from load_disaggregation.domain.exceptions import WeightValidationError

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-9


def weight_uniform(scenario: Scenario) -> AgentDemandField:
    """Split each region's demand equally among its agents."""
    counts = np.bincount(scenario.agent_region_index, minlength=scenario.n_regions)
    demand = scenario.agent_region_demand / counts[scenario.agent_region_index]
    return AgentDemandField(scenario.agent_ids, demand, "uniform")


def normalize_per_region(scenario: Scenario, raw: np.ndarray) -> np.ndarray:
    """Scale nonnegative raw weights to shares that sum to 1 within each region."""
    totals = np.bincount(scenario.agent_region_index, weights=raw, minlength=scenario.n_regions)
    return raw / totals[scenario.agent_region_index]


def weight_gpm(scenario: Scenario) -> AgentDemandField:
    """Grid Point Model: weight each agent by its region's share for its dominant class.

    Regions whose raw weights are all zero fall back to a uniform split.
    """
    dominant = np.argmax(scenario.landuse, axis=1)
    raw = scenario.region_shares[scenario.agent_region_index, dominant]
    totals = np.bincount(scenario.agent_region_index, weights=raw, minlength=scenario.n_regions)

    dead = totals <= 0
    if np.any(dead):
        logger.warning(
            "GPM weights are all zero in regions %s; using uniform split there",
            scenario.region_ids[dead].tolist(),
        )
        raw = np.where(dead[scenario.agent_region_index], 1.0, raw)

    demand = scenario.agent_region_demand * normalize_per_region(scenario, raw)
    return AgentDemandField(scenario.agent_ids, demand, "gpm")


def apply_weights(weights: AllocationWeights, scenario: Scenario) -> AgentDemandField:
    """Turn per-source allocation weights into agent demands, d_a = w_{s(a),a} * D_r(a)."""
    w = reindex(weights.agent_ids, weights.weights, scenario.agent_ids)
    sources = reindex(weights.agent_ids, weights.source_ids, scenario.agent_ids)
    if not np.array_equal(sources, scenario.agent_region_ids):
        raise WeightValidationError("Weight sources must coincide with agent regions")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise WeightValidationError("Allocation weights must be finite and >= 0")

    sums = np.bincount(scenario.agent_region_index, weights=w, minlength=scenario.n_regions)
    off = np.abs(sums - 1.0) > WEIGHT_SUM_TOL
    if np.any(off):
        raise WeightValidationError(
            f"Weights of sources {scenario.region_ids[off].tolist()} do not sum to 1"
        )
    return AgentDemandField(scenario.agent_ids, w * scenario.agent_region_demand, "weights")
