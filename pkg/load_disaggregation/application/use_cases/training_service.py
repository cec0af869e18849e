"""Training use case for the learned allocation model."""

import logging
from typing import Optional

from load_disaggregation.application.dto.schemas import TrainConfig
from load_disaggregation.domain.entities import PriorTarget, Scenario, TrainedAllocator
from load_disaggregation.domain.services.auxiliary import (
    DEFAULT_GAMMA,
    prior_target,
    proximity_scores,
)
from load_disaggregation.domain.services.cost_model import fit_cost_model

logger = logging.getLogger(__name__)


class TrainingService:
    """Service for fitting cost models on a (training) scenario."""

    def __init__(self, gamma: float = DEFAULT_GAMMA) -> None:
        self.gamma = gamma

    def prior_targets(self, scenario: Scenario) -> tuple[PriorTarget, PriorTarget]:
        """NTL and Proximity prior targets; proximity counts same-region substations only."""
        ntl = prior_target(scenario, scenario.ntl, label="ntl")
        prox_values = proximity_scores(scenario, self.gamma, same_region=True)
        prox = prior_target(scenario, prox_values, label="prox")
        return ntl, prox

    def train(
        self,
        scenario: Scenario,
        config: TrainConfig,
        lambda_ntl: Optional[float] = None,
        lambda_prox: Optional[float] = None,
    ) -> TrainedAllocator:
        """Fit the cost model; explicit lambdas override the config's."""
        lam_ntl = config.lambda_ntl if lambda_ntl is None else lambda_ntl
        lam_prox = config.lambda_prox if lambda_prox is None else lambda_prox
        targets_ntl: Optional[PriorTarget] = None
        targets_prox: Optional[PriorTarget] = None
        if lam_ntl > 0 or lam_prox > 0:
            ntl, prox = self.prior_targets(scenario)
            targets_ntl = ntl if lam_ntl > 0 else None
            targets_prox = prox if lam_prox > 0 else None

        logger.info(
            "Training on regions %s (lambda_ntl=%s, lambda_prox=%s, seed=%d)",
            scenario.region_ids.tolist(),
            lam_ntl,
            lam_prox,
            config.seed,
        )
        return fit_cost_model(
            scenario,
            targets_ntl,
            targets_prox,
            lambda_ntl=lam_ntl,
            lambda_prox=lam_prox,
            learning_rate=config.learning_rate,
            max_epochs=config.max_epochs,
            convergence_tol=config.convergence_tol,
            seed=config.seed,
            temperature=config.temperature,
            gamma=self.gamma,
        )
