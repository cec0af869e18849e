"""Power-flow validation of disaggregated substation loads."""

import logging
import math
from typing import Mapping, Optional

import numpy as np

from load_disaggregation.application.dto.schemas import (
    PowerFlowConfig,
    PowerFlowReport,
    PowerFlowRow,
)
from load_disaggregation.domain.entities import Scenario
from load_disaggregation.domain.exceptions import InsufficientSampleError, KeyMismatchError
from load_disaggregation.domain.services.network import (
    NetworkModel,
    PowerFlowSolution,
    build_network,
    loading_deviation,
    solve_ac,
)

logger = logging.getLogger(__name__)

REFERENCE_LABEL = "True load"


def smallest_region(scenario: Scenario) -> int:
    """Region with the fewest substations; ties go to the lowest id."""
    counts = [
        (len(scenario.region_substation_indices(r)), r) for r in scenario.region_ids.tolist()
    ]
    counts = [c for c in counts if c[0] > 0]
    if not counts:
        raise InsufficientSampleError("No region has substations")
    return min(counts)[1]


class PowerFlowService:
    """Service solving one region's network under reference and predicted loads."""

    def network_for(self, scenario: Scenario, config: PowerFlowConfig) -> NetworkModel:
        region_id = smallest_region(scenario) if config.region_id is None else config.region_id
        if region_id not in set(scenario.region_ids.tolist()):
            raise KeyMismatchError(f"Unknown region {region_id}")
        idx = scenario.region_substation_indices(region_id)
        substations = [scenario.substations[i] for i in idx]
        return build_network(substations, config.line.to_domain())

    def solve(
        self,
        network: NetworkModel,
        scenario: Scenario,
        substation_demand: np.ndarray,
        power_factor: float,
    ) -> PowerFlowSolution:
        """Apparent demand (MVA) per substation becomes P = S pf and Q = P tan(acos pf)."""
        position = {int(s): i for i, s in enumerate(scenario.substation_ids)}
        apparent = np.array(
            [substation_demand[position[bus]] for bus in network.load_bus_ids], dtype=float
        )
        p = apparent * power_factor
        q = p * math.tan(math.acos(power_factor))
        return solve_ac(network, p, q)

    def validate(
        self,
        scenario: Scenario,
        predictions: Mapping[str, np.ndarray],
        config: Optional[PowerFlowConfig] = None,
    ) -> tuple[PowerFlowReport, dict[str, PowerFlowSolution]]:
        """Loading deviation of each method against the recorded substation demand."""
        config = config or PowerFlowConfig()
        network = self.network_for(scenario, config)
        region_id = config.region_id if config.region_id is not None else smallest_region(scenario)

        solutions = {
            REFERENCE_LABEL: self.solve(
                network, scenario, scenario.substation_demand, config.power_factor
            )
        }
        for method in config.methods:
            if method not in predictions:
                logger.warning("Power flow: no prediction for '%s', skipped", method)
                continue
            solutions[method] = self.solve(
                network, scenario, np.asarray(predictions[method]), config.power_factor
            )

        reference = solutions[REFERENCE_LABEL]
        rows = []
        for method, solution in solutions.items():
            deviation = loading_deviation(solution, reference)
            rows.append(
                PowerFlowRow(
                    method=method,
                    delta_mae_pp=deviation.delta_mae_pp,
                    max_loading_pct=deviation.max_loading_pct,
                    converged=solution.converged,
                    max_mismatch_pu=solution.max_mismatch_pu,
                )
            )
        logger.info(
            "Power flow on region %d: %d buses, %d lines, %d methods",
            region_id,
            network.n_buses,
            network.n_lines,
            len(rows) - 1,
        )
        report = PowerFlowReport(
            region_id=region_id,
            n_buses=network.n_buses,
            n_lines=network.n_lines,
            power_factor=config.power_factor,
            rows=rows,
        )
        return report, solutions
