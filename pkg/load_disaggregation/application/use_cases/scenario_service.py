"""Scenario use cases: synthetic generation and file ingestion."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from load_disaggregation.application.dto.schemas import SynthConfig
from load_disaggregation.domain.entities import AgentDemandField, Scenario
from load_disaggregation.domain.services.partition import aggregate_to_substations, assign_voronoi
from load_disaggregation.domain.value_objects import RCI_CLASSES
from load_disaggregation.ports.repositories import ScenarioRepository

logger = logging.getLogger(__name__)

URBAN_BACKGROUND = 0.15
NTL_SCALE = 267.0
NTL_LOG_SD = 0.6
URBAN_MIX = np.array([0.50, 0.25, 0.17, 0.03, 0.05])
RURAL_MIX = np.array([0.10, 0.03, 0.02, 0.60, 0.25])


@dataclass(frozen=True)
class SyntheticWorld:
    """A generated scenario with its agent-level ground truth."""

    scenario: Scenario
    true_demand: AgentDemandField
    informed_base: AgentDemandField
    config: Optional[SynthConfig] = None


@dataclass(frozen=True)
class _RegionDraw:
    agent_coords: np.ndarray
    landuse: np.ndarray
    ntl: np.ndarray
    true_demand: np.ndarray
    informed: np.ndarray
    substation_coords: np.ndarray


def _bumps(points: np.ndarray, centres: np.ndarray, widths: np.ndarray) -> np.ndarray:
    d2 = np.sum((points[:, None, :] - centres[None, :, :]) ** 2, axis=2)
    return np.exp(-d2 / (2.0 * widths[None, :] ** 2))


def _standardize(values: np.ndarray) -> np.ndarray:
    spread = values.std()
    return (values - values.mean()) / spread if spread > 0 else np.zeros_like(values)


def _smooth_field(
    points: np.ndarray, origin: np.ndarray, size: float, scale: float, rng: np.random.Generator
) -> np.ndarray:
    """Unit-variance random field, smooth at ``scale`` km."""
    ticks = np.linspace(0.0, size, int(math.ceil(size / scale)) + 1)
    grid = origin + np.stack(np.meshgrid(ticks, ticks), axis=-1).reshape(-1, 2)
    field = _bumps(points, grid, np.full(len(grid), scale)) @ rng.standard_normal(len(grid))
    return _standardize(field)


def _sample_agents(
    n_agents: int,
    origin: np.ndarray,
    size: float,
    centres: np.ndarray,
    widths: np.ndarray,
    amplitudes: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Agent sites with density proportional to the urbanization surface."""
    masses = np.concatenate([[URBAN_BACKGROUND * size**2], 2.0 * math.pi * amplitudes * widths**2])
    component = rng.choice(len(masses), size=n_agents, p=masses / masses.sum())
    points = origin + rng.uniform(0.0, size, (n_agents, 2))
    clustered = np.flatnonzero(component > 0)
    while clustered.size:
        k = component[clustered] - 1
        points[clustered] = centres[k] + widths[k, None] * rng.standard_normal((clustered.size, 2))
        outside = np.any((points[clustered] < origin) | (points[clustered] > origin + size), axis=1)
        clustered = clustered[outside]
    return points


def _draw_region(config: SynthConfig, origin: np.ndarray, rng: np.random.Generator) -> _RegionDraw:
    size = config.region_size_km
    n_agents = config.agents_per_region
    n_subs = config.substations_per_region
    k = config.urbanization_clusters

    centres = origin + rng.uniform(0.15 * size, 0.85 * size, (k, 2))
    widths = config.cluster_width_km * rng.uniform(0.6, 1.4, k)
    amplitudes = rng.uniform(0.5, 1.5, k)
    points = _sample_agents(n_agents, origin, size, centres, widths, amplitudes, rng)
    urban = URBAN_BACKGROUND + _bumps(points, centres, widths) @ amplitudes
    urban_signal = _standardize(np.log(urban))

    demand_shock = np.exp(config.demand_noise * rng.standard_normal(n_agents))
    true_demand = config.demand_per_agent_mva * urban / urban.mean() * demand_shock

    score = urban / (urban + np.median(urban))
    mix = score[:, None] * URBAN_MIX + (1.0 - score[:, None]) * RURAL_MIX
    draws = rng.gamma(config.landuse_concentration * mix)
    draws = np.maximum(draws, 1e-300)
    landuse = draws / draws.sum(axis=1, keepdims=True)
    if not np.any(np.isin(np.argmax(landuse, axis=1), [int(c) for c in RCI_CLASSES])):
        landuse[np.argmax(urban)] = URBAN_MIX

    cell = size / math.sqrt(n_subs)
    nuisance = _smooth_field(points, origin, size, cell, rng)
    radiance = _standardize(
        config.ntl_fidelity * urban_signal + (1.0 - config.ntl_fidelity) * nuisance
    )
    ntl = NTL_SCALE * np.exp(
        NTL_LOG_SD * radiance + config.ntl_noise * rng.standard_normal(n_agents)
    )

    # agents are already dense where urbanization is high
    informed_site = rng.uniform(size=n_subs) < config.prox_fidelity
    near_agents = points[rng.choice(n_agents, size=n_subs, replace=False)]
    anywhere = origin + rng.uniform(0.0, size, (n_subs, 2))
    jitter = config.substation_jitter_km * rng.standard_normal((n_subs, 2))
    substations = np.where(informed_site[:, None], near_agents, anywhere) + jitter
    substations = np.clip(substations, origin, origin + size)

    rho = config.base_redundancy
    residual = _smooth_field(points, origin, size, cell, rng)
    error = _standardize(rho * urban_signal + math.sqrt(1.0 - rho**2) * residual)
    informed = true_demand**config.base_signal * np.exp(config.base_noise * error)

    return _RegionDraw(points, landuse, ntl, true_demand, informed, substations)


def generate_world(config: SynthConfig) -> SyntheticWorld:
    """Seeded synthetic world; regions are tiled squares drawn from independent streams."""
    columns = int(math.ceil(math.sqrt(config.n_regions)))
    streams = np.random.SeedSequence(config.seed).spawn(config.n_regions)
    draws = []
    for r, stream in enumerate(streams):
        origin = config.region_size_km * np.array([r % columns, r // columns], dtype=float)
        draws.append(_draw_region(config, origin, np.random.default_rng(stream)))

    n_a, n_s = config.agents_per_region, config.substations_per_region
    region_ids = np.arange(config.n_regions, dtype=np.int64)
    true_demand = np.concatenate([d.true_demand for d in draws])
    region_demand = np.array([d.true_demand.sum() for d in draws])
    shares = np.array(
        [(d.true_demand[:, None] * d.landuse).sum(axis=0) / d.true_demand.sum() for d in draws]
    )
    arrays = dict(
        region_ids=region_ids,
        region_demand=region_demand,
        region_shares=shares / shares.sum(axis=1, keepdims=True),
        region_area=np.full(config.n_regions, config.region_size_km**2),
        agent_ids=np.arange(config.n_regions * n_a, dtype=np.int64),
        agent_coords=np.vstack([d.agent_coords for d in draws]),
        landuse=np.vstack([d.landuse for d in draws]),
        ntl=np.concatenate([d.ntl for d in draws]),
        agent_region_ids=np.repeat(region_ids, n_a),
        substation_ids=np.arange(config.n_regions * n_s, dtype=np.int64),
        substation_coords=np.vstack([d.substation_coords for d in draws]),
        substation_region_ids=np.repeat(region_ids, n_s),
    )
    draft = Scenario.from_arrays(substation_demand=np.zeros(config.n_regions * n_s), **arrays)
    substation_truth = aggregate_to_substations(true_demand, assign_voronoi(draft), draft)
    scenario = Scenario.from_arrays(substation_demand=substation_truth, **arrays)

    informed = np.concatenate(
        [d.informed / d.informed.sum() * d.true_demand.sum() for d in draws]
    )
    logger.info(
        "Generated synthetic scenario (seed %d): %d regions, %d agents, %d substations",
        config.seed,
        scenario.n_regions,
        scenario.n_agents,
        scenario.n_substations,
    )
    return SyntheticWorld(
        scenario=scenario,
        true_demand=AgentDemandField(scenario.agent_ids, true_demand, "truth"),
        informed_base=AgentDemandField(scenario.agent_ids, informed, "informed"),
        config=config,
    )


class ScenarioService:
    """Service for scenario generation and persistence."""

    def __init__(self, scenario_repository: ScenarioRepository) -> None:
        self.scenario_repository = scenario_repository

    def generate(self, config: SynthConfig) -> SyntheticWorld:
        return generate_world(config)

    def load(self, path: Path) -> Scenario:
        return self.scenario_repository.load(path)

    def load_world(self, path: Path) -> tuple[Scenario, Optional[SyntheticWorld]]:
        """Load a scenario and, when present, the synthetic truth saved with it."""
        scenario = self.scenario_repository.load(path)
        truth = self.scenario_repository.load_truth(path)
        if truth is None:
            return scenario, None
        true_demand, informed = truth
        return scenario, SyntheticWorld(scenario, true_demand, informed)

    def save(self, scenario: Scenario, path: Path) -> None:
        self.scenario_repository.save(scenario, path)

    def save_world(self, world: SyntheticWorld, path: Path) -> None:
        self.scenario_repository.save(world.scenario, path)
        self.scenario_repository.save_truth(path, world.true_demand, world.informed_base)
