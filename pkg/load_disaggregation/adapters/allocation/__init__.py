"""Learned-base providers."""

import numpy as np

from load_disaggregation.domain.entities import AgentDemandField, Scenario, TrainedAllocator
from load_disaggregation.domain.exceptions import KeyMismatchError
from load_disaggregation.domain.services.cost_model import allocation_weights
from load_disaggregation.domain.services.weighting import apply_weights
from load_disaggregation.ports.allocation import LearnedBase

LEARNED_LABEL = "learned"


class TrainedModelBase(LearnedBase):
    """Base field from a trained cost model; inference never applies corrections."""

    def __init__(self, allocator: TrainedAllocator) -> None:
        self.allocator = allocator

    @property
    def lambdas(self) -> tuple[float, float]:
        return (self.allocator.lambda_ntl, self.allocator.lambda_prox)

    def predict(self, scenario: Scenario) -> AgentDemandField:
        weights = allocation_weights(
            self.allocator.params, scenario, gamma=self.allocator.gamma
        )
        return apply_weights(weights, scenario).relabel(LEARNED_LABEL)


class FixedFieldBase(LearnedBase):
    """Precomputed agent field, such as the informed synthetic surrogate.

    The field must be normalized per region, so restricting it to a subset of
    regions keeps it conserving.
    """

    def __init__(self, field: AgentDemandField, lambdas: tuple[float, float] = (0.0, 0.0)) -> None:
        self.field = field
        self._lambdas = lambdas
        order = np.argsort(field.agent_ids, kind="stable")
        self._sorted_ids = field.agent_ids[order]
        self._sorted_demand = field.demand[order]

    @property
    def lambdas(self) -> tuple[float, float]:
        return self._lambdas

    def predict(self, scenario: Scenario) -> AgentDemandField:
        position = np.searchsorted(self._sorted_ids, scenario.agent_ids)
        position = np.minimum(position, len(self._sorted_ids) - 1)
        if not np.array_equal(self._sorted_ids[position], scenario.agent_ids):
            raise KeyMismatchError("Fixed base field does not cover every scenario agent")
        return AgentDemandField(scenario.agent_ids, self._sorted_demand[position], LEARNED_LABEL)
