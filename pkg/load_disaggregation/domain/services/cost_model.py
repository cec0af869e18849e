"""Trainable allocation model: affine edge costs, per-source softmax, KL losses.

Edge cost c(s, a) = theta . x_a + bias over a 9-dim agent feature vector
[landuse(5), log1p(ntl), log1p(prox), x, y]. Proximity uses only the agent's
own region's substations and coordinates are standardized per region, so the
features of an agent do not depend on which other regions are in the scenario.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from load_disaggregation.domain.entities import (
    AllocationWeights,
    CorrectionFactorField,
    CostModelParams,
    LossRecord,
    PriorTarget,
    Scenario,
    TrainedAllocator,
    reindex,
)
from load_disaggregation.domain.exceptions import (
    FieldValidationError,
    InsufficientSampleError,
    KeyMismatchError,
    TrainingAbortedError,
    TrainingDivergedError,
)
from load_disaggregation.domain.services.auxiliary import DEFAULT_GAMMA, proximity_scores
from load_disaggregation.domain.services.statistics import spearman
from load_disaggregation.domain.value_objects import N_LANDUSE

logger = logging.getLogger(__name__)

N_FEATURES = N_LANDUSE + 4
LOG_FLOOR = 1e-12
INIT_SCALE = 0.01
DIVERGENCE_FACTOR = 10.0
MAX_HALVINGS = 40


def agent_features(scenario: Scenario, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
    """Feature matrix (n_agents x 9) in scenario agent order."""
    prox = proximity_scores(scenario, gamma, same_region=True)
    region = scenario.agent_region_index
    n = scenario.n_regions
    coords = scenario.agent_coords
    counts = np.bincount(region, minlength=n)[:, None]
    mean = np.stack([np.bincount(region, coords[:, k], n) for k in range(2)], axis=1) / counts
    centred = coords - mean[region]
    var = np.stack([np.bincount(region, centred[:, k] ** 2, n) for k in range(2)], axis=1) / counts
    std = np.sqrt(var)
    std[std == 0] = 1.0
    return np.column_stack(
        [scenario.landuse, np.log1p(scenario.ntl), np.log1p(prox), centred / std[region]]
    )


def _segment_softmax(logits: np.ndarray, segment: np.ndarray, n_segments: int) -> np.ndarray:
    peak = np.full(n_segments, -np.inf)
    np.maximum.at(peak, segment, logits)
    e = np.exp(logits - peak[segment])
    return e / np.bincount(segment, weights=e, minlength=n_segments)[segment]


def _softmax_weights(
    params: CostModelParams, features: np.ndarray, scenario: Scenario
) -> np.ndarray:
    if features.shape != (scenario.n_agents, N_FEATURES):
        raise FieldValidationError(
            f"Expected features of shape ({scenario.n_agents}, {N_FEATURES})"
        )
    if params.theta.shape != (N_FEATURES,):
        raise FieldValidationError(f"Cost model needs {N_FEATURES} weights")
    cost = features @ params.theta + params.bias
    logits = -cost / params.temperature
    return _segment_softmax(logits, scenario.agent_region_index, scenario.n_regions)


def allocation_weights(
    params: CostModelParams,
    scenario: Scenario,
    features: Optional[np.ndarray] = None,
    gamma: float = DEFAULT_GAMMA,
) -> AllocationWeights:
    """w_{s,a} = softmax over the source's agents of -c(s, a) / tau."""
    if features is None:
        features = agent_features(scenario, gamma)
    w = _softmax_weights(params, features, scenario)
    return AllocationWeights(scenario.agent_ids, scenario.agent_region_ids, w)


def _landuse_terms(w: np.ndarray, scenario: Scenario) -> tuple[float, np.ndarray]:
    """Mean KL(q_true || normalized reconstruction) and its derivative w.r.t. w."""
    region = scenario.agent_region_index
    n = scenario.n_regions
    recon = np.stack(
        [np.bincount(region, w * scenario.landuse[:, k], n) for k in range(N_LANDUSE)], axis=1
    )
    clamped = np.maximum(recon, LOG_FLOOR)
    total = clamped.sum(axis=1)
    q = scenario.region_shares
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, q * (np.log(q) - np.log(clamped / total[:, None])), 0.0)
    value = float(terms.sum() / n)

    q_mass = q.sum(axis=1)
    grad_recon = np.where(recon > LOG_FLOOR, -q / clamped + (q_mass / total)[:, None], 0.0)
    grad_w = np.einsum("ak,ak->a", scenario.landuse, grad_recon[region]) / n
    return value, grad_w


def _prior_terms(w: np.ndarray, q: np.ndarray, n_sources: int) -> tuple[float, np.ndarray]:
    """Mean over sources of sum_a q log(q / w) and its derivative w.r.t. w."""
    clamped = np.maximum(w, LOG_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, q * (np.log(q) - np.log(clamped)), 0.0)
    grad_w = np.where((q > 0) & (w > LOG_FLOOR), -q / clamped, 0.0) / n_sources
    return float(terms.sum() / n_sources), grad_w


def landuse_loss(weights: AllocationWeights, scenario: Scenario) -> float:
    """Land-use reconstruction loss of the weights against the region consumption shares."""
    w = reindex(weights.agent_ids, weights.weights, scenario.agent_ids)
    return _landuse_terms(w, scenario)[0]


def prior_loss(weights: AllocationWeights, target: PriorTarget) -> float:
    """Forward KL of the prior target against the weights, averaged over sources."""
    w = reindex(weights.agent_ids, weights.weights, target.agent_ids)
    sources = reindex(weights.agent_ids, weights.source_ids, target.agent_ids)
    if not np.array_equal(sources, target.source_ids):
        raise KeyMismatchError("Weights and prior target disagree on agent sources")
    n_sources = len(np.unique(target.source_ids))
    return _prior_terms(w, target.q, n_sources)[0]


@dataclass(frozen=True)
class LossEvaluation:
    """Loss components and the gradient w.r.t. (theta, bias)."""

    record: LossRecord
    gradient: np.ndarray


def _target_q(target: Optional[PriorTarget], scenario: Scenario) -> Optional[np.ndarray]:
    if target is None:
        return None
    return reindex(target.agent_ids, target.q, scenario.agent_ids)


def total_loss(
    params: CostModelParams,
    scenario: Scenario,
    targets_ntl: Optional[PriorTarget] = None,
    targets_prox: Optional[PriorTarget] = None,
    lambda_ntl: float = 0.0,
    lambda_prox: float = 0.0,
    features: Optional[np.ndarray] = None,
) -> LossEvaluation:
    """L = L_landuse + lambda_ntl * L_ntl + lambda_prox * L_prox with its analytic gradient."""
    if lambda_ntl < 0 or lambda_prox < 0:
        raise FieldValidationError("Prior weights must be >= 0")
    if features is None:
        features = agent_features(scenario)
    n = scenario.n_regions
    w = _softmax_weights(params, features, scenario)

    landuse, grad_w = _landuse_terms(w, scenario)
    components = {"ntl": 0.0, "prox": 0.0}
    priors = (("ntl", targets_ntl, lambda_ntl), ("prox", targets_prox, lambda_prox))
    for key, target, lam in priors:
        q = _target_q(target, scenario)
        if q is None:
            continue
        components[key], grad_prior = _prior_terms(w, q, n)
        grad_w = grad_w + lam * grad_prior

    total = landuse + lambda_ntl * components["ntl"] + lambda_prox * components["prox"]

    # backprop through the per-source softmax and z = -c / tau
    region = scenario.agent_region_index
    inner = np.bincount(region, weights=w * grad_w, minlength=n)
    grad_z = w * (grad_w - inner[region])
    grad_cost = -grad_z / params.temperature
    gradient = np.append(features.T @ grad_cost, grad_cost.sum())

    record = LossRecord(
        landuse=landuse, ntl_prior=components["ntl"], prox_prior=components["prox"], total=total
    )
    return LossEvaluation(record=record, gradient=gradient)


def initial_params(seed: int, temperature: float = 1.0) -> CostModelParams:
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, INIT_SCALE, N_FEATURES)
    return CostModelParams(tuple(theta.tolist()), 0.0, temperature, seed)


def fit_cost_model(
    scenario: Scenario,
    targets_ntl: Optional[PriorTarget] = None,
    targets_prox: Optional[PriorTarget] = None,
    *,
    lambda_ntl: float = 0.0,
    lambda_prox: float = 0.0,
    learning_rate: float = 0.5,
    max_epochs: int = 300,
    convergence_tol: float = 1e-7,
    seed: int = 0,
    temperature: float = 1.0,
    gamma: float = DEFAULT_GAMMA,
) -> TrainedAllocator:
    """Gradient descent with step halving until the loss stops improving.

    ``loss_trace[0]`` is the loss at the seeded initial parameters, followed by
    one record per accepted epoch. A zero epoch budget returns the initial
    parameters unconverged.
    """
    features = agent_features(scenario, gamma)
    params = initial_params(seed, temperature)
    evaluate = partial(
        total_loss,
        scenario=scenario,
        targets_ntl=targets_ntl,
        targets_prox=targets_prox,
        lambda_ntl=lambda_ntl,
        lambda_prox=lambda_prox,
        features=features,
    )
    current = evaluate(params)
    initial = current.record.total
    trace = [current.record]
    converged = False

    for epoch in range(1, max_epochs + 1):
        if not np.all(np.isfinite(current.gradient)):
            raise TrainingAbortedError(
                f"Non-finite gradient at epoch {epoch} (loss {current.record.total:.6g})"
            )
        step = learning_rate
        accepted = None
        for _ in range(MAX_HALVINGS):
            theta = params.theta - step * current.gradient[:-1]
            candidate_params = CostModelParams(
                tuple(theta.tolist()), params.bias, temperature, seed
            )
            candidate = evaluate(candidate_params)
            if candidate.record.total < current.record.total:
                accepted = (candidate_params, candidate)
                break
            step /= 2.0
        if accepted is None:
            converged = True
            break

        params, candidate = accepted
        if not np.isfinite(candidate.record.total) or candidate.record.total > (
            DIVERGENCE_FACTOR * initial
        ):
            raise TrainingDivergedError(
                f"Loss grew from {initial:.6g} to {candidate.record.total:.6g} at epoch {epoch}"
            )
        improvement = current.record.total - candidate.record.total
        current = candidate
        trace.append(current.record)
        if epoch % 50 == 0:
            logger.debug("epoch %d loss %.6g (step %.3g)", epoch, current.record.total, step)
        if improvement < convergence_tol:
            converged = True
            break

    logger.info(
        "Training finished after %d epochs: loss %.6g -> %.6g (converged=%s)",
        len(trace) - 1,
        initial,
        current.record.total,
        converged,
    )
    return TrainedAllocator(
        params=params,
        loss_trace=tuple(trace),
        converged=converged,
        trained_regions=tuple(scenario.region_ids.tolist()),
        lambda_ntl=lambda_ntl,
        lambda_prox=lambda_prox,
        gamma=gamma,
    )


@dataclass(frozen=True)
class WeightProbe:
    """Within-source Spearman correlation between weights and a factor field."""

    mean: Optional[float]
    std: Optional[float]
    per_source: dict[int, Optional[float]]

    @property
    def n_missing(self) -> int:
        return sum(1 for rho in self.per_source.values() if rho is None)


def probe_weight_factor_correlation(
    weights: AllocationWeights, factors: CorrectionFactorField
) -> WeightProbe:
    f = factors.aligned_to(weights.agent_ids)
    per_source: dict[int, Optional[float]] = {}
    for source in np.unique(weights.source_ids).tolist():
        mask = weights.source_ids == source
        try:
            per_source[source] = spearman(weights.weights[mask], f[mask])
        except InsufficientSampleError:
            per_source[source] = None
    present = np.array([rho for rho in per_source.values() if rho is not None])
    if present.size == 0:
        return WeightProbe(None, None, per_source)
    std = float(present.std(ddof=1)) if present.size > 1 else 0.0
    return WeightProbe(float(present.mean()), std, per_source)
