"""Pytest configuration and fixtures."""

from typing import Optional

import numpy as np
import pytest

from load_disaggregation.application.dto.schemas import SynthConfig, TrainConfig
from load_disaggregation.application.use_cases.scenario_service import generate_world
from load_disaggregation.domain.entities import Scenario

PURE = np.eye(5)


def build_scenario(
    agent_coords: list[tuple[float, float]],
    agent_regions: list[int],
    substation_coords: list[tuple[float, float]],
    substation_regions: list[int],
    region_demand: Optional[dict[int, float]] = None,
    landuse: Optional[np.ndarray] = None,
    ntl: Optional[list[float]] = None,
    substation_demand: Optional[list[float]] = None,
    region_shares: Optional[dict[int, tuple[float, ...]]] = None,
    agent_ids: Optional[list[int]] = None,
    substation_ids: Optional[list[int]] = None,
) -> Scenario:
    """Scenario from plain lists; unspecified columns get simple valid defaults."""
    region_ids = sorted(set(agent_regions) | set(substation_regions))
    n_a, n_s = len(agent_coords), len(substation_coords)
    demand = region_demand or {r: 10.0 for r in region_ids}
    shares = region_shares or {r: (0.4, 0.3, 0.1, 0.1, 0.1) for r in region_ids}
    return Scenario.from_arrays(
        region_ids=np.array(region_ids),
        region_demand=np.array([demand[r] for r in region_ids]),
        region_shares=np.array([shares[r] for r in region_ids]),
        region_area=np.ones(len(region_ids)),
        agent_ids=np.array(agent_ids or list(range(1, n_a + 1))),
        agent_coords=np.array(agent_coords, dtype=float),
        landuse=np.tile(PURE[0], (n_a, 1)) if landuse is None else np.asarray(landuse),
        ntl=np.array(ntl if ntl is not None else [10.0] * n_a, dtype=float),
        agent_region_ids=np.array(agent_regions),
        substation_ids=np.array(substation_ids or list(range(101, 101 + n_s))),
        substation_coords=np.array(substation_coords, dtype=float),
        substation_demand=np.array(
            substation_demand if substation_demand is not None else [1.0] * n_s
        ),
        substation_region_ids=np.array(substation_regions),
    )


@pytest.fixture
def scenario_builder():
    """Fixture exposing the list-based scenario builder."""
    return build_scenario


@pytest.fixture
def two_region_scenario():
    """Two regions with mixed land use, lit and dark agents and uneven substations."""
    landuse = np.array(
        [
            [0.7, 0.1, 0.1, 0.05, 0.05],
            [0.1, 0.6, 0.1, 0.1, 0.1],
            [0.2, 0.1, 0.5, 0.1, 0.1],
            [0.1, 0.0, 0.0, 0.8, 0.1],
            [0.5, 0.3, 0.0, 0.1, 0.1],
            [0.0, 0.1, 0.0, 0.2, 0.7],
            [0.6, 0.2, 0.1, 0.05, 0.05],
            [0.1, 0.1, 0.0, 0.7, 0.1],
            [0.2, 0.5, 0.1, 0.1, 0.1],
            [0.3, 0.0, 0.0, 0.3, 0.4],
        ]
    )
    return build_scenario(
        agent_coords=[
            (0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (3.0, 3.0), (0.5, 0.5), (2.5, 0.5),
            (10.0, 10.0), (12.0, 10.0), (10.5, 11.0), (13.0, 13.0),
        ],
        agent_regions=[1, 1, 1, 1, 1, 1, 2, 2, 2, 2],
        substation_coords=[(0.2, 0.2), (2.8, 2.5), (10.0, 10.5), (12.5, 10.0), (13.0, 12.5)],
        substation_regions=[1, 1, 2, 2, 2],
        region_demand={1: 10.0, 2: 6.0},
        landuse=landuse,
        ntl=[40.0, 25.0, 12.0, 0.0, 30.0, 1.0, 55.0, 0.5, 20.0, 2.0],
        substation_demand=[7.0, 3.0, 3.0, 2.0, 1.0],
        region_shares={1: (0.5, 0.2, 0.1, 0.1, 0.1), 2: (0.3, 0.1, 0.1, 0.4, 0.1)},
    )  # fmt: skip


@pytest.fixture(scope="session")
def small_synth_config():
    """Desk-scale generator settings for fast tests."""
    return SynthConfig(
        seed=3,
        n_regions=4,
        agents_per_region=80,
        substations_per_region=8,
        region_size_km=6.0,
        cluster_width_km=1.0,
    )


@pytest.fixture(scope="session")
def small_world(small_synth_config):
    """Synthetic world with agent-level truth and the informed base."""
    return generate_world(small_synth_config)


@pytest.fixture
def quick_train_config():
    """Short training run."""
    return TrainConfig(max_epochs=15, learning_rate=0.5, seed=1)
