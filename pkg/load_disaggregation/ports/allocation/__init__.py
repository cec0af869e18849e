"""Learned-base port."""

from abc import ABC, abstractmethod

from load_disaggregation.domain.entities import AgentDemandField, Scenario


class LearnedBase(ABC):
    """Provider of the learned base field for a scenario.

    Implementations are immutable once built; ``lambdas`` identifies the prior
    weights the underlying model was trained with.
    """

    @property
    @abstractmethod
    def lambdas(self) -> tuple[float, float]:
        """(lambda_ntl, lambda_prox) of the model."""
        pass

    @abstractmethod
    def predict(self, scenario: Scenario) -> AgentDemandField:
        """Agent demands of every agent of ``scenario``."""
        pass
