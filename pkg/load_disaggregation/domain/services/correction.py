"""Post-correction mechanisms applied to a base agent demand field."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from load_disaggregation.domain.entities import AgentDemandField, CorrectionFactorField, Scenario
from load_disaggregation.domain.exceptions import FieldValidationError
from load_disaggregation.domain.services.auxiliary import combine_factors, ntl_factor, prox_factor
from load_disaggregation.domain.value_objects import CorrectionMode, FactorKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrectionConfig:
    """Settings of a post-correction run."""

    mode: CorrectionMode = CorrectionMode.MULTIPLICATIVE_RENORM
    noise_repeats: int = 10
    noise_seed: int = 0
    additive_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.noise_repeats < 1:
            raise FieldValidationError("noise_repeats must be >= 1")
        if not self.additive_gain >= 0:
            raise FieldValidationError("additive_gain must be >= 0")


def _inputs(
    base: AgentDemandField, factors: CorrectionFactorField, scenario: Scenario
) -> tuple[np.ndarray, np.ndarray]:
    return base.aligned(scenario), factors.aligned_to(scenario.agent_ids)


def correct_multiplicative_renorm(
    base: AgentDemandField, factors: CorrectionFactorField, scenario: Scenario
) -> AgentDemandField:
    """Scale agent demands by the factors and renormalize each region back to D_r."""
    label = f"{base.method_label}*{factors.kind.value}"
    demand, f = _inputs(base, factors, scenario)
    if np.all(f == 1.0):
        return base.relabel(label)

    region = scenario.agent_region_index
    weighted = demand * f
    totals = np.bincount(region, weights=weighted, minlength=scenario.n_regions)
    empty = totals <= 0
    if np.any(empty):
        logger.warning(
            "Regions %s carry no base demand; nothing to redistribute",
            scenario.region_ids[empty].tolist(),
        )
    safe = np.where(empty, 1.0, totals)
    corrected = np.where(
        empty[region], 0.0, scenario.agent_region_demand * weighted / safe[region]
    )
    return AgentDemandField(scenario.agent_ids, corrected, label)


def correct_multiplicative_raw(
    base: AgentDemandField, factors: CorrectionFactorField, scenario: Scenario
) -> AgentDemandField:
    """Scale agent demands by the factors without renormalization (non-conserving)."""
    demand, f = _inputs(base, factors, scenario)
    return AgentDemandField(
        scenario.agent_ids,
        demand * f,
        f"{base.method_label}*{factors.kind.value}(raw)",
        conserving=False,
    )


def additive_blend_weight(gain: float) -> float:
    """kappa = gain / (1 + gain), clamped to [0, 1]."""
    if math.isinf(gain):
        return 1.0
    return min(max(gain / (1.0 + gain), 0.0), 1.0)


def correct_additive_renorm(
    base: AgentDemandField,
    factors: CorrectionFactorField,
    scenario: Scenario,
    gain: float = 1.0,
) -> AgentDemandField:
    """Blend base shares with normalized factor shares, then scale back to D_r."""
    label = f"{base.method_label}+{factors.kind.value}"
    kappa = additive_blend_weight(gain)
    if kappa == 0.0:
        return base.relabel(label)

    demand, f = _inputs(base, factors, scenario)
    region = scenario.agent_region_index
    totals_f = np.bincount(region, weights=f, minlength=scenario.n_regions)
    shape = f / totals_f[region]
    share = (1.0 - kappa) * demand / scenario.agent_region_demand + kappa * shape
    return AgentDemandField(scenario.agent_ids, scenario.agent_region_demand * share, label)


def correct_noise_renorm(
    base: AgentDemandField,
    scenario: Scenario,
    config: CorrectionConfig,
    reference: Optional[CorrectionFactorField] = None,
) -> list[AgentDemandField]:
    """Multiplicative renormalized correction with spatially uncorrelated log-normal factors.

    The log-mean and log-variance match ``reference`` (by default the combined
    NTL x Proximity field of the same scenario). One field per repeat.
    """
    if reference is None:
        reference = combine_factors(ntl_factor(scenario), prox_factor(scenario))
    log_f = np.log(reference.aligned_to(scenario.agent_ids))
    mu, sigma = float(np.mean(log_f)), float(np.std(log_f))

    streams = np.random.SeedSequence(config.noise_seed).spawn(config.noise_repeats)
    fields = []
    for repeat, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        draws = np.exp(mu + sigma * rng.standard_normal(scenario.n_agents))
        noise = CorrectionFactorField(
            scenario.agent_ids,
            draws,
            FactorKind.NOISE,
            {"mu": mu, "sigma": sigma, "seed": config.noise_seed, "repeat": repeat},
        )
        fields.append(correct_multiplicative_renorm(base, noise, scenario))
    return fields


def apply_correction(
    base: AgentDemandField,
    factors: CorrectionFactorField,
    scenario: Scenario,
    config: CorrectionConfig,
) -> list[AgentDemandField]:
    """Dispatch on ``config.mode``; deterministic modes return a single field."""
    if config.mode is CorrectionMode.MULTIPLICATIVE_RENORM:
        return [correct_multiplicative_renorm(base, factors, scenario)]
    if config.mode is CorrectionMode.MULTIPLICATIVE_RAW:
        return [correct_multiplicative_raw(base, factors, scenario)]
    if config.mode is CorrectionMode.ADDITIVE_RENORM:
        return [correct_additive_renorm(base, factors, scenario, config.additive_gain)]
    return correct_noise_renorm(base, scenario, config, reference=factors)
