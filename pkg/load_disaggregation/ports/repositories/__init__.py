"""Repository port interfaces."""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Optional, Sequence

from load_disaggregation.domain.entities import AgentDemandField, Scenario, TrainedAllocator


class ScenarioRepository(ABC):
    """Port interface for scenario persistence."""

    @abstractmethod
    def load(self, path: Path) -> Scenario:
        """Load a scenario directory."""
        pass

    @abstractmethod
    def save(self, scenario: Scenario, path: Path) -> None:
        """Write a scenario directory."""
        pass

    @abstractmethod
    def save_truth(
        self, path: Path, true_demand: AgentDemandField, informed_base: AgentDemandField
    ) -> None:
        """Write the synthetic agent-level ground truth next to a scenario."""
        pass

    @abstractmethod
    def load_truth(self, path: Path) -> Optional[tuple[AgentDemandField, AgentDemandField]]:
        """Read the synthetic ground truth, or None for scenarios without one."""
        pass


class ArtifactRepository(ABC):
    """Port interface for run outputs under one output directory."""

    @abstractmethod
    def write_json(self, name: str, document: Any) -> Path:
        """Write a JSON document with sorted keys."""
        pass

    @abstractmethod
    def read_json(self, name: str) -> Any:
        """Read a JSON document written earlier."""
        pass

    @abstractmethod
    def write_table(self, name: str, rows: Sequence[Any]) -> Path:
        """Write rows (mappings or pydantic models) as CSV."""
        pass

    @abstractmethod
    def write_text(self, name: str, text: str) -> Path:
        """Write a plain-text artifact."""
        pass

    @abstractmethod
    def save_allocator(self, name: str, allocator: TrainedAllocator) -> Path:
        """Write trained cost-model parameters as a versioned JSON document."""
        pass

    @abstractmethod
    def load_allocator(self, name: str) -> TrainedAllocator:
        """Read trained cost-model parameters."""
        pass
