"""NTL and Proximity correction factors and prior target distributions."""

import logging
from typing import Mapping

import numpy as np

from load_disaggregation.domain.entities import (
    Agent,
    CorrectionFactorField,
    PriorTarget,
    Scenario,
    Substation,
)
from load_disaggregation.domain.exceptions import DegenerateFieldError, FieldValidationError
from load_disaggregation.domain.services.partition import rci_mask
from load_disaggregation.domain.value_objects import FactorKind

logger = logging.getLogger(__name__)

MIN_DISTANCE_KM = 0.01
DARK_FIELD_EPSILON = 0.01
NTL_FLOOR_PERCENTILE = 5.0
DEFAULT_GAMMA = 2.0
_CHUNK = 2048


def lower_median(values: np.ndarray) -> float:
    """Median with the lower-median convention for even counts."""
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise DegenerateFieldError("Median of an empty set")
    return float(ordered[(ordered.size - 1) // 2])


def prox_score(agent: Agent, substations: list[Substation], gamma: float = DEFAULT_GAMMA) -> float:
    """Inverse-distance-power sum over all substations, distances clamped at 10 m."""
    if not substations:
        raise FieldValidationError("Proximity needs at least one substation")
    coords = np.array([s.coords for s in substations], dtype=float)
    return float(_prox_scores(np.array([agent.coords], dtype=float), coords, gamma)[0])


def _prox_scores(points: np.ndarray, substations: np.ndarray, gamma: float) -> np.ndarray:
    if gamma < 0:
        raise FieldValidationError("gamma must be >= 0")
    scores = np.empty(len(points))
    for start in range(0, len(points), _CHUNK):
        block = points[start : start + _CHUNK]
        delta = block[:, None, :] - substations[None, :, :]
        distance = np.maximum(np.sqrt(np.einsum("ijk,ijk->ij", delta, delta)), MIN_DISTANCE_KM)
        scores[start : start + _CHUNK] = np.sum(distance ** (-gamma), axis=1)
    return scores


def proximity_scores(
    scenario: Scenario, gamma: float = DEFAULT_GAMMA, same_region: bool = False
) -> np.ndarray:
    """Proximity score of every agent, aligned with the scenario's agents.

    With ``same_region`` only the agent's own region's substations contribute.
    """
    if not same_region:
        return _prox_scores(scenario.agent_coords, scenario.substation_coords, gamma)
    scores = np.empty(scenario.n_agents)
    for region_id in scenario.region_ids.tolist():
        a_idx = scenario.region_agent_indices(region_id)
        s_idx = scenario.region_substation_indices(region_id)
        scores[a_idx] = _prox_scores(
            scenario.agent_coords[a_idx], scenario.substation_coords[s_idx], gamma
        )
    return scores


def ntl_factor(scenario: Scenario, alpha: float = 1.0) -> CorrectionFactorField:
    """Log-ratio NTL factor raised to the intensity ``alpha``.

    The floor epsilon is the 5th percentile of nonzero RCI radiance and the
    reference is the RCI median. Scenarios without any lit RCI agent fall back
    to epsilon = 0.01 and the all-agent median.
    """
    rci = rci_mask(scenario)
    rci_ntl = scenario.ntl[rci]
    lit = rci_ntl[rci_ntl > 0]
    fallback = lit.size == 0
    if fallback:
        epsilon = DARK_FIELD_EPSILON
        median = lower_median(scenario.ntl)
        logger.warning("No lit RCI agents; NTL factor falls back to eps=%s", epsilon)
    else:
        epsilon = float(np.percentile(lit, NTL_FLOOR_PERCENTILE))
        median = lower_median(rci_ntl)
    if median <= 0:
        raise DegenerateFieldError("degenerate NTL field: median radiance is 0")

    base = np.log1p(scenario.ntl + epsilon) / np.log1p(median)
    return CorrectionFactorField(
        scenario.agent_ids,
        base**alpha,
        FactorKind.NTL,
        {"epsilon": epsilon, "median": median, "alpha": alpha, "fallback": fallback},
    )


def prox_factor(scenario: Scenario, gamma: float = DEFAULT_GAMMA) -> CorrectionFactorField:
    """Log-ratio Proximity factor relative to the RCI median score."""
    if scenario.n_substations == 0:
        raise FieldValidationError("Proximity needs at least one substation")
    prox = proximity_scores(scenario, gamma)
    rci = rci_mask(scenario)
    fallback = not np.any(rci)
    median = lower_median(prox if fallback else prox[rci])
    if median <= 0:
        raise DegenerateFieldError("degenerate Proximity field: median score is 0")
    factor = np.log1p(prox) / np.log1p(median)
    return CorrectionFactorField(
        scenario.agent_ids,
        factor,
        FactorKind.PROXIMITY,
        {"gamma": gamma, "median": median, "fallback": fallback},
    )


def combine_factors(
    f1: CorrectionFactorField, f2: CorrectionFactorField, beta: float = 1.0
) -> CorrectionFactorField:
    """Joint factor (f1 * f2) ** beta, keyed like ``f1``."""
    product = f1.factor * f2.aligned_to(f1.agent_ids)
    params = {f"{f1.kind.value}.{k}": v for k, v in f1.params.items()}
    params.update({f"{f2.kind.value}.{k}": v for k, v in f2.params.items()})
    params["beta"] = beta
    return CorrectionFactorField(f1.agent_ids, product**beta, FactorKind.COMBINED, params)


def prior_target(
    scenario: Scenario, values: np.ndarray | Mapping[int, float], label: str = ""
) -> PriorTarget:
    """Per-source target distribution over RCI agents from auxiliary values v(a).

    q_{s,a} is proportional to log(1 + v(a)) on the source's RCI agents and 0
    elsewhere; a source whose log terms are all zero gets a uniform target.
    """
    if isinstance(values, Mapping):
        v = np.array([values[int(a)] for a in scenario.agent_ids], dtype=float)
    else:
        v = np.asarray(values, dtype=float)
    if v.shape != (scenario.n_agents,):
        raise FieldValidationError("Prior values must cover every agent")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise FieldValidationError("Prior values must be finite and >= 0")

    rci = rci_mask(scenario).astype(float)
    region = scenario.agent_region_index
    n_rci = np.bincount(region, weights=rci, minlength=scenario.n_regions)
    if np.any(n_rci == 0):
        raise DegenerateFieldError(
            f"Sources {scenario.region_ids[n_rci == 0].tolist()} have no RCI agents"
        )

    mass = np.log1p(v) * rci
    totals = np.bincount(region, weights=mass, minlength=scenario.n_regions)
    flat = totals <= 0
    if np.any(flat):
        logger.info(
            "Flat prior values in sources %s; using uniform targets",
            scenario.region_ids[flat].tolist(),
        )
    mass = np.where(flat[region], rci, mass)
    totals = np.where(flat, n_rci, totals)
    q = mass / totals[region]
    return PriorTarget(scenario.agent_ids, scenario.agent_region_ids, q, label)
