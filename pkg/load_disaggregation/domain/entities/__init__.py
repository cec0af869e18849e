"""Domain entities for the load disaggregation pipeline.

Entities are immutable after construction. Per-agent fields store their values
as numpy arrays aligned with an ``agent_ids`` array; the scenario's own agent
order is the canonical order produced by every domain service.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from load_disaggregation.domain.exceptions import (
    FieldValidationError,
    KeyMismatchError,
    ScenarioValidationError,
)
from load_disaggregation.domain.value_objects import N_LANDUSE, FactorKind, LandUseClass

SIMPLEX_TOL = 1e-9


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def reindex(source_ids: np.ndarray, values: np.ndarray, target_ids: np.ndarray) -> np.ndarray:
    """Reorder ``values`` keyed by ``source_ids`` into the order of ``target_ids``."""
    if source_ids.shape == target_ids.shape and np.array_equal(source_ids, target_ids):
        return values
    if len(source_ids) != len(target_ids) or set(source_ids.tolist()) != set(target_ids.tolist()):
        raise KeyMismatchError(
            f"Field covers {len(source_ids)} agents, expected {len(target_ids)} matching ids"
        )
    position = {int(agent_id): i for i, agent_id in enumerate(source_ids)}
    order = np.fromiter(
        (position[int(a)] for a in target_ids), dtype=np.int64, count=len(target_ids)
    )
    return values[order]


@dataclass(frozen=True)
class Agent:
    """Spatial sample point carrying land-use, NTL and coordinate features."""

    id: int
    coords: tuple[float, float]
    landuse: tuple[float, ...]
    ntl: float
    region_id: int

    def __post_init__(self) -> None:
        if len(self.landuse) != N_LANDUSE:
            raise ScenarioValidationError(
                f"Agent {self.id}: land-use vector needs {N_LANDUSE} components"
            )
        if min(self.landuse) < 0 or abs(sum(self.landuse) - 1.0) > SIMPLEX_TOL:
            raise ScenarioValidationError(
                f"Agent {self.id}: land-use proportions must be >= 0 and sum to 1"
            )
        if not np.isfinite(self.ntl) or self.ntl < 0:
            raise ScenarioValidationError(f"Agent {self.id}: ntl must be finite and >= 0")

    @property
    def dominant_class(self) -> LandUseClass:
        """Dominant land-use class; ties go to the lowest class index."""
        return LandUseClass(int(np.argmax(self.landuse)))


@dataclass(frozen=True)
class Substation:
    """Primary substation with metered peak demand (MVA)."""

    id: int
    coords: tuple[float, float]
    demand_actual: float
    region_id: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.demand_actual) or self.demand_actual < 0:
            raise ScenarioValidationError(f"Substation {self.id}: demand_actual must be >= 0")


@dataclass(frozen=True)
class Region:
    """Region with known aggregate demand and consumption structure."""

    id: int
    demand_total: float
    consumption_shares: tuple[float, ...]
    area: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.demand_total) or self.demand_total <= 0:
            raise ScenarioValidationError(f"Region {self.id}: demand_total must be > 0")
        if len(self.consumption_shares) != N_LANDUSE:
            raise ScenarioValidationError(
                f"Region {self.id}: consumption shares need {N_LANDUSE} components"
            )
        if (
            min(self.consumption_shares) < 0
            or abs(sum(self.consumption_shares) - 1.0) > SIMPLEX_TOL
        ):
            raise ScenarioValidationError(
                f"Region {self.id}: consumption shares must be >= 0 and sum to 1"
            )
        if not np.isfinite(self.area) or self.area <= 0:
            raise ScenarioValidationError(f"Region {self.id}: area must be > 0")


class Scenario:
    """The immutable world: regions, agents and substations.

    Besides the entity tuples, a scenario exposes read-only column arrays that
    the numerical services operate on.
    """

    def __init__(
        self,
        regions: Sequence[Region],
        agents: Sequence[Agent],
        substations: Sequence[Substation],
    ) -> None:
        self._build(
            region_ids=np.array([r.id for r in regions], dtype=np.int64),
            region_demand=np.array([r.demand_total for r in regions], dtype=float),
            region_shares=np.array(
                [r.consumption_shares for r in regions], dtype=float
            ).reshape(-1, N_LANDUSE),
            region_area=np.array([r.area for r in regions], dtype=float),
            agent_ids=np.array([a.id for a in agents], dtype=np.int64),
            agent_coords=np.array([a.coords for a in agents], dtype=float).reshape(-1, 2),
            landuse=np.array([a.landuse for a in agents], dtype=float).reshape(-1, N_LANDUSE),
            ntl=np.array([a.ntl for a in agents], dtype=float),
            agent_region_ids=np.array([a.region_id for a in agents], dtype=np.int64),
            substation_ids=np.array([s.id for s in substations], dtype=np.int64),
            substation_coords=np.array([s.coords for s in substations], dtype=float).reshape(-1, 2),
            substation_demand=np.array([s.demand_actual for s in substations], dtype=float),
            substation_region_ids=np.array([s.region_id for s in substations], dtype=np.int64),
        )
        self.__dict__["regions"] = tuple(regions)
        self.__dict__["agents"] = tuple(agents)
        self.__dict__["substations"] = tuple(substations)

    @classmethod
    def from_arrays(cls, **columns: np.ndarray) -> "Scenario":
        """Build a scenario directly from column arrays (see ``_build`` for names)."""
        scenario = cls.__new__(cls)
        scenario._build(**columns)
        return scenario

    def _build(
        self,
        *,
        region_ids: np.ndarray,
        region_demand: np.ndarray,
        region_shares: np.ndarray,
        region_area: np.ndarray,
        agent_ids: np.ndarray,
        agent_coords: np.ndarray,
        landuse: np.ndarray,
        ntl: np.ndarray,
        agent_region_ids: np.ndarray,
        substation_ids: np.ndarray,
        substation_coords: np.ndarray,
        substation_demand: np.ndarray,
        substation_region_ids: np.ndarray,
    ) -> None:
        columns = {
            "region_ids": np.asarray(region_ids, dtype=np.int64),
            "region_demand": np.asarray(region_demand, dtype=float),
            "region_shares": np.asarray(region_shares, dtype=float).reshape(-1, N_LANDUSE),
            "region_area": np.asarray(region_area, dtype=float),
            "agent_ids": np.asarray(agent_ids, dtype=np.int64),
            "agent_coords": np.asarray(agent_coords, dtype=float).reshape(-1, 2),
            "landuse": np.asarray(landuse, dtype=float).reshape(-1, N_LANDUSE),
            "ntl": np.asarray(ntl, dtype=float),
            "agent_region_ids": np.asarray(agent_region_ids, dtype=np.int64),
            "substation_ids": np.asarray(substation_ids, dtype=np.int64),
            "substation_coords": np.asarray(substation_coords, dtype=float).reshape(-1, 2),
            "substation_demand": np.asarray(substation_demand, dtype=float),
            "substation_region_ids": np.asarray(substation_region_ids, dtype=np.int64),
        }
        _validate_columns(columns)
        region_position = {int(r): i for i, r in enumerate(columns["region_ids"])}
        columns["agent_region_index"] = np.array(
            [region_position[int(r)] for r in columns["agent_region_ids"]], dtype=np.int64
        )
        columns["substation_region_index"] = np.array(
            [region_position[int(r)] for r in columns["substation_region_ids"]], dtype=np.int64
        )
        for name, array in columns.items():
            self.__dict__[name] = _frozen(array.copy())

    def __setattr__(self, name: str, value: Any) -> None:
        raise AttributeError("Scenario is immutable")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        names = (
            "region_ids", "region_demand", "region_shares", "region_area",
            "agent_ids", "agent_coords", "landuse", "ntl", "agent_region_ids",
            "substation_ids", "substation_coords", "substation_demand", "substation_region_ids",
        )  # fmt: skip
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)

    def __hash__(self) -> int:
        return hash((self.n_regions, self.n_agents, self.n_substations))

    @property
    def n_regions(self) -> int:
        return len(self.region_ids)

    @property
    def n_agents(self) -> int:
        return len(self.agent_ids)

    @property
    def n_substations(self) -> int:
        return len(self.substation_ids)

    @cached_property
    def regions(self) -> tuple[Region, ...]:
        return tuple(
            Region(
                id=int(self.region_ids[i]),
                demand_total=float(self.region_demand[i]),
                consumption_shares=tuple(float(v) for v in self.region_shares[i]),
                area=float(self.region_area[i]),
            )
            for i in range(self.n_regions)
        )

    @cached_property
    def agents(self) -> tuple[Agent, ...]:
        return tuple(
            Agent(
                id=int(self.agent_ids[i]),
                coords=(float(self.agent_coords[i, 0]), float(self.agent_coords[i, 1])),
                landuse=tuple(float(v) for v in self.landuse[i]),
                ntl=float(self.ntl[i]),
                region_id=int(self.agent_region_ids[i]),
            )
            for i in range(self.n_agents)
        )

    @cached_property
    def substations(self) -> tuple[Substation, ...]:
        return tuple(
            Substation(
                id=int(self.substation_ids[i]),
                coords=(float(self.substation_coords[i, 0]), float(self.substation_coords[i, 1])),
                demand_actual=float(self.substation_demand[i]),
                region_id=int(self.substation_region_ids[i]),
            )
            for i in range(self.n_substations)
        )

    @cached_property
    def agent_region_demand(self) -> np.ndarray:
        """D_r of each agent's region, aligned with the agents."""
        return _frozen(self.region_demand[self.agent_region_index].copy())

    def region_agent_indices(self, region_id: int) -> np.ndarray:
        """Positions of the agents of one region."""
        return np.flatnonzero(self.agent_region_ids == region_id)

    def region_substation_indices(self, region_id: int) -> np.ndarray:
        """Positions of the substations of one region."""
        return np.flatnonzero(self.substation_region_ids == region_id)

    def subset(self, region_ids: Iterable[int]) -> "Scenario":
        """Scenario restricted to the given regions, preserving order."""
        keep = set(int(r) for r in region_ids)
        unknown = keep - set(self.region_ids.tolist())
        if unknown:
            raise ScenarioValidationError(f"Unknown region ids: {sorted(unknown)}")
        r_mask = np.isin(self.region_ids, list(keep))
        a_mask = np.isin(self.agent_region_ids, list(keep))
        s_mask = np.isin(self.substation_region_ids, list(keep))
        return Scenario.from_arrays(
            region_ids=self.region_ids[r_mask],
            region_demand=self.region_demand[r_mask],
            region_shares=self.region_shares[r_mask],
            region_area=self.region_area[r_mask],
            agent_ids=self.agent_ids[a_mask],
            agent_coords=self.agent_coords[a_mask],
            landuse=self.landuse[a_mask],
            ntl=self.ntl[a_mask],
            agent_region_ids=self.agent_region_ids[a_mask],
            substation_ids=self.substation_ids[s_mask],
            substation_coords=self.substation_coords[s_mask],
            substation_demand=self.substation_demand[s_mask],
            substation_region_ids=self.substation_region_ids[s_mask],
        )


def _validate_columns(c: Mapping[str, np.ndarray]) -> None:
    n_r, n_a, n_s = len(c["region_ids"]), len(c["agent_ids"]), len(c["substation_ids"])
    if n_r == 0:
        raise ScenarioValidationError("Scenario has no regions")
    for name, expected in (
        ("region_demand", n_r), ("region_shares", n_r), ("region_area", n_r),
        ("agent_coords", n_a), ("landuse", n_a), ("ntl", n_a), ("agent_region_ids", n_a),
        ("substation_coords", n_s), ("substation_demand", n_s), ("substation_region_ids", n_s),
    ):  # fmt: skip
        if len(c[name]) != expected:
            raise ScenarioValidationError(
                f"Column '{name}' has {len(c[name])} rows, expected {expected}"
            )
    for name in ("region_ids", "agent_ids", "substation_ids"):
        if len(np.unique(c[name])) != len(c[name]):
            raise ScenarioValidationError(f"Duplicate ids in '{name}'")
    for name in ("region_demand", "region_shares", "region_area", "agent_coords", "landuse",
                 "ntl", "substation_coords", "substation_demand"):  # fmt: skip
        if not np.all(np.isfinite(c[name])):
            raise ScenarioValidationError(f"Column '{name}' contains non-finite values")

    if np.any(c["region_demand"] <= 0):
        raise ScenarioValidationError("Region demand_total must be > 0")
    if np.any(c["region_area"] <= 0):
        raise ScenarioValidationError("Region area must be > 0")
    shares = c["region_shares"]
    if np.any(shares < 0) or np.any(np.abs(shares.sum(axis=1) - 1.0) > SIMPLEX_TOL):
        raise ScenarioValidationError("Region consumption shares must be >= 0 and sum to 1")
    landuse = c["landuse"]
    invalid = (landuse < 0).any(axis=1) | (np.abs(landuse.sum(axis=1) - 1.0) > SIMPLEX_TOL)
    if np.any(invalid):
        bad = int(c["agent_ids"][np.argmax(invalid)])
        raise ScenarioValidationError(
            f"Agent {bad}: land-use proportions must be >= 0 and sum to 1"
        )
    if np.any(c["ntl"] < 0):
        raise ScenarioValidationError("Agent ntl must be >= 0")
    if np.any(c["substation_demand"] < 0):
        raise ScenarioValidationError("Substation demand_actual must be >= 0")

    known = set(c["region_ids"].tolist())
    for name, label in (("agent_region_ids", "agent"), ("substation_region_ids", "substation")):
        orphans = set(c[name].tolist()) - known
        if orphans:
            raise ScenarioValidationError(
                f"A {label} references unknown region ids {sorted(orphans)}"
            )
    for region_id in c["region_ids"].tolist():
        if not np.any(c["agent_region_ids"] == region_id):
            raise ScenarioValidationError(f"Region {region_id} has no agents")
        if not np.any(c["substation_region_ids"] == region_id):
            raise ScenarioValidationError(f"Region {region_id} has no substations")


class VoronoiAssignment:
    """Hard assignment of every agent to one same-region substation."""

    def __init__(self, agent_ids: np.ndarray, substation_ids: np.ndarray) -> None:
        if len(agent_ids) != len(substation_ids):
            raise FieldValidationError("Assignment arrays differ in length")
        self.agent_ids = _frozen(np.asarray(agent_ids, dtype=np.int64).copy())
        self.substation_ids = _frozen(np.asarray(substation_ids, dtype=np.int64).copy())

    @property
    def agent_to_substation(self) -> dict[int, int]:
        return dict(zip(self.agent_ids.tolist(), self.substation_ids.tolist()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VoronoiAssignment):
            return NotImplemented
        return np.array_equal(self.agent_ids, other.agent_ids) and np.array_equal(
            self.substation_ids, other.substation_ids
        )


class AgentDemandField:
    """Agent-level demands (MVA) for one method configuration.

    ``conserving`` is False only for fields produced without renormalization;
    such fields are exempt from the per-region conservation invariant.
    """

    def __init__(
        self,
        agent_ids: np.ndarray,
        demand: np.ndarray,
        method_label: str,
        conserving: bool = True,
    ) -> None:
        agent_ids = np.asarray(agent_ids, dtype=np.int64)
        demand = np.asarray(demand, dtype=float)
        if agent_ids.shape != demand.shape:
            raise FieldValidationError("agent_ids and demand differ in shape")
        if not np.all(np.isfinite(demand)) or np.any(demand < 0):
            raise FieldValidationError(f"'{method_label}': demand must be finite and >= 0")
        self.agent_ids = _frozen(agent_ids.copy())
        self.demand = _frozen(demand.copy())
        self.method_label = method_label
        self.conserving = conserving

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.agent_ids.tolist(), self.demand.tolist()))

    def aligned(self, scenario: Scenario) -> np.ndarray:
        """Demand values in the scenario's agent order."""
        return reindex(self.agent_ids, self.demand, scenario.agent_ids)

    def aligned_to(self, agent_ids: np.ndarray) -> np.ndarray:
        return reindex(self.agent_ids, self.demand, np.asarray(agent_ids, dtype=np.int64))

    def region_totals(self, scenario: Scenario) -> np.ndarray:
        return np.bincount(
            scenario.agent_region_index,
            weights=self.aligned(scenario),
            minlength=scenario.n_regions,
        )

    def conservation_error(self, scenario: Scenario) -> float:
        """Largest relative deviation of a region sum from D_r."""
        totals = self.region_totals(scenario)
        return float(np.max(np.abs(totals - scenario.region_demand) / scenario.region_demand))

    def check_conservation(self, scenario: Scenario, rtol: float = 1e-9) -> bool:
        return self.conservation_error(scenario) <= rtol

    def relabel(self, method_label: str) -> "AgentDemandField":
        return AgentDemandField(self.agent_ids, self.demand, method_label, self.conserving)


class CorrectionFactorField:
    """Strictly positive per-agent correction factors with provenance."""

    def __init__(
        self,
        agent_ids: np.ndarray,
        factor: np.ndarray,
        kind: FactorKind,
        params: Optional[Mapping[str, Any]] = None,
    ) -> None:
        agent_ids = np.asarray(agent_ids, dtype=np.int64)
        factor = np.asarray(factor, dtype=float)
        if agent_ids.shape != factor.shape:
            raise FieldValidationError("agent_ids and factor differ in shape")
        if not np.all(np.isfinite(factor)) or np.any(factor <= 0):
            raise FieldValidationError(f"{kind.value} factors must be finite and > 0")
        self.agent_ids = _frozen(agent_ids.copy())
        self.factor = _frozen(factor.copy())
        self.kind = kind
        self.params: dict[str, Any] = dict(params or {})

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.agent_ids.tolist(), self.factor.tolist()))

    def aligned_to(self, agent_ids: np.ndarray) -> np.ndarray:
        return reindex(self.agent_ids, self.factor, np.asarray(agent_ids, dtype=np.int64))


class AllocationWeights:
    """Per-source allocation weights w_{s,a}; one source per region."""

    def __init__(self, agent_ids: np.ndarray, source_ids: np.ndarray, weights: np.ndarray) -> None:
        self.agent_ids = _frozen(np.asarray(agent_ids, dtype=np.int64).copy())
        self.source_ids = _frozen(np.asarray(source_ids, dtype=np.int64).copy())
        self.weights = _frozen(np.asarray(weights, dtype=float).copy())
        if not (self.agent_ids.shape == self.source_ids.shape == self.weights.shape):
            raise FieldValidationError("Weight arrays differ in shape")

    def source_sums(self) -> dict[int, float]:
        sources, inverse = np.unique(self.source_ids, return_inverse=True)
        sums = np.bincount(inverse, weights=self.weights, minlength=len(sources))
        return dict(zip(sources.tolist(), sums.tolist()))


class PriorTarget:
    """Target distribution q_{s,a} over each source's RCI agents (zero elsewhere)."""

    def __init__(
        self, agent_ids: np.ndarray, source_ids: np.ndarray, q: np.ndarray, label: str = ""
    ) -> None:
        self.agent_ids = _frozen(np.asarray(agent_ids, dtype=np.int64).copy())
        self.source_ids = _frozen(np.asarray(source_ids, dtype=np.int64).copy())
        self.q = _frozen(np.asarray(q, dtype=float).copy())
        self.label = label

    def for_source(self, source_id: int) -> dict[int, float]:
        mask = self.source_ids == source_id
        return dict(zip(self.agent_ids[mask].tolist(), self.q[mask].tolist()))


@dataclass(frozen=True)
class RegionMetrics:
    """Substation-level error metrics of one region."""

    region_id: int
    rmse: float
    mae: float
    corr: Optional[float]


@dataclass(frozen=True)
class CostModelParams:
    """Parameters of the affine edge-cost model c(s, a) = theta . x_a + bias."""

    weights: tuple[float, ...]
    bias: float = 0.0
    temperature: float = 1.0
    init_seed: int = 0

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise FieldValidationError("temperature must be > 0")
        if not all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise FieldValidationError("cost-model parameters must be finite")

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class LossRecord:
    """Loss components of one training epoch."""

    landuse: float
    ntl_prior: float
    prox_prior: float
    total: float


@dataclass(frozen=True)
class TrainedAllocator:
    """Result of training the cost model."""

    params: CostModelParams
    loss_trace: tuple[LossRecord, ...]
    converged: bool
    trained_regions: tuple[int, ...] = ()
    lambda_ntl: float = 0.0
    lambda_prox: float = 0.0
    gamma: float = 2.0
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)
