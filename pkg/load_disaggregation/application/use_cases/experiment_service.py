"""Experiment use cases: method execution, cross-validation and sweeps."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from load_disaggregation.adapters.allocation import TrainedModelBase
from load_disaggregation.application.dto.schemas import (
    AuditRecord,
    CVPlan,
    EvalReport,
    MethodSpec,
    RegionMetricRow,
    SweepConfig,
    SweepReport,
    SweepRow,
    TrainConfig,
    WeightProbeSummary,
)
from load_disaggregation.application.use_cases.evaluation_service import EvaluationService
from load_disaggregation.application.use_cases.training_service import TrainingService
from load_disaggregation.domain.entities import (
    AgentDemandField,
    CorrectionFactorField,
    Scenario,
    TrainedAllocator,
    VoronoiAssignment,
)
from load_disaggregation.domain.exceptions import (
    DegenerateFieldError,
    InsufficientSampleError,
    MethodSpecError,
)
from load_disaggregation.domain.services.auxiliary import combine_factors, ntl_factor, prox_factor
from load_disaggregation.domain.services.correction import apply_correction
from load_disaggregation.domain.services.cost_model import (
    allocation_weights,
    probe_weight_factor_correlation,
)
from load_disaggregation.domain.services.partition import aggregate_to_substations, assign_voronoi
from load_disaggregation.domain.services.weighting import weight_gpm, weight_uniform
from load_disaggregation.domain.value_objects import (
    AuxSource,
    BaseMethod,
    Integration,
    SweepAxis,
)
from load_disaggregation.ports.allocation import LearnedBase

logger = logging.getLogger(__name__)

JACKKNIFE_MIN_SUBSTATIONS = 4


@dataclass(frozen=True)
class MethodPrediction:
    """Agent fields and substation demands of one method (several for noise repeats)."""

    spec: MethodSpec
    fields: tuple[AgentDemandField, ...]
    substation_demand: tuple[np.ndarray, ...]

    @property
    def label(self) -> str:
        return self.spec.label

    @property
    def conserving(self) -> bool:
        return all(f.conserving for f in self.fields)

    @property
    def mean_substation_demand(self) -> np.ndarray:
        return np.mean(np.stack(self.substation_demand), axis=0)


@dataclass(frozen=True)
class FoldJob:
    seed: int
    fold: int
    train_regions: tuple[int, ...]
    test_regions: tuple[int, ...]


@dataclass
class FoldOutcome:
    job: FoldJob
    rows: list[RegionMetricRow]
    predictions: dict[str, np.ndarray]
    allocators: dict[tuple[float, float], TrainedAllocator]
    audit: AuditRecord


@dataclass
class CVResult:
    """Per-seed region metrics plus out-of-fold predictions keyed by (label, seed)."""

    seed_rows: list[RegionMetricRow]
    predictions: dict[tuple[str, int], np.ndarray]
    audit: list[AuditRecord]
    conserving: dict[str, bool]
    allocators: dict[tuple[int, int, float, float], TrainedAllocator] = field(default_factory=dict)


def build_factors(spec: MethodSpec, scenario: Scenario) -> CorrectionFactorField:
    """Correction factors of a spec: ntl^alpha, prox(gamma) or their product^beta."""
    if spec.uses_ntl and spec.uses_prox:
        return combine_factors(
            ntl_factor(scenario, spec.alpha), prox_factor(scenario, spec.gamma), spec.beta
        )
    if spec.uses_ntl:
        return ntl_factor(scenario, spec.alpha)
    if spec.uses_prox:
        return prox_factor(scenario, spec.gamma)
    raise MethodSpecError(f"'{spec.label}' has no auxiliary source")


class ExperimentService:
    """Service running method specs, cross-validation plans and sweeps."""

    def __init__(
        self,
        training_service: TrainingService,
        evaluation_service: EvaluationService,
        workers: int = 1,
    ) -> None:
        self.training_service = training_service
        self.evaluation_service = evaluation_service
        self.workers = max(1, workers)

    def run_method(
        self,
        spec: MethodSpec,
        scenario: Scenario,
        learned: Optional[LearnedBase] = None,
        assignment: Optional[VoronoiAssignment] = None,
    ) -> MethodPrediction:
        """Weighting, then correction, then Voronoi aggregation."""
        if spec.base is BaseMethod.UNIFORM:
            base = weight_uniform(scenario)
        elif spec.base is BaseMethod.GPM:
            base = weight_gpm(scenario)
        else:
            if learned is None:
                raise MethodSpecError(f"'{spec.label}' needs a learned base")
            if tuple(learned.lambdas) != spec.prior_lambdas:
                raise MethodSpecError(
                    f"'{spec.label}' needs a model trained with lambdas {spec.prior_lambdas}, "
                    f"got {tuple(learned.lambdas)}"
                )
            base = learned.predict(scenario)

        correction = spec.correction_config()
        if correction is None:
            fields = [base]
        else:
            fields = apply_correction(base, build_factors(spec, scenario), scenario, correction)
        fields = [f.relabel(spec.label) for f in fields]

        assignment = assignment or assign_voronoi(scenario)
        substations = tuple(aggregate_to_substations(f, assignment, scenario) for f in fields)
        return MethodPrediction(spec, tuple(fields), substations)

    def fold_assignment(self, plan: CVPlan, region_ids: Sequence[int]) -> list[FoldJob]:
        """Seeded region-to-fold split; every region is tested exactly once per seed."""
        regions = np.sort(np.asarray(region_ids, dtype=np.int64))
        jobs = []
        for seed in plan.seeds:
            if plan.single_pass:
                everything = tuple(regions.tolist())
                jobs.append(FoldJob(seed, 0, everything, everything))
                continue
            if plan.n_folds > len(regions):
                raise InsufficientSampleError(
                    f"{plan.n_folds} folds over {len(regions)} regions leaves an empty fold"
                )
            permuted = np.random.default_rng(seed).permutation(regions)
            for fold, test in enumerate(np.array_split(permuted, plan.n_folds)):
                test_set = set(test.tolist())
                train = tuple(r for r in regions.tolist() if r not in test_set)
                jobs.append(FoldJob(seed, fold, train, tuple(sorted(test_set))))
        return jobs

    def _run_fold(
        self,
        job: FoldJob,
        scenario: Scenario,
        specs: Sequence[MethodSpec],
        train_config: TrainConfig,
        fixed_base: Optional[LearnedBase],
        assignment: VoronoiAssignment,
    ) -> FoldOutcome:
        if not job.train_regions:
            raise InsufficientSampleError(
                f"Seed {job.seed}, fold {job.fold} has no training regions"
            )
        keys = sorted({spec.prior_lambdas for spec in specs})
        models: dict[tuple[float, float], LearnedBase] = {}
        allocators: dict[tuple[float, float], TrainedAllocator] = {}
        if fixed_base is not None:
            models = {key: fixed_base for key in keys}
        else:
            train_scenario = scenario.subset(job.train_regions)
            config = train_config.model_copy(update={"seed": train_config.seed + job.seed})
            for key in keys:
                allocator = self.training_service.train(train_scenario, config, *key)
                allocators[key] = allocator
                models[key] = TrainedModelBase(allocator)

        rows: list[RegionMetricRow] = []
        predictions: dict[str, np.ndarray] = {}
        for spec in specs:
            prediction = self.run_method(spec, scenario, models[spec.prior_lambdas], assignment)
            rows.extend(
                self.evaluation_service.region_rows(
                    spec.label,
                    prediction.substation_demand,
                    scenario,
                    job.test_regions,
                    seed=job.seed,
                )
            )
            predictions[spec.label] = prediction.mean_substation_demand

        audit = AuditRecord(
            seed=job.seed,
            fold=job.fold,
            train_regions=list(job.train_regions),
            test_regions=list(job.test_regions),
            models=[f"lambda_ntl={k[0]:g},lambda_prox={k[1]:g}" for k in keys],
        )
        logger.info(
            "Seed %d fold %d: trained on %s, tested on %s",
            job.seed,
            job.fold,
            list(job.train_regions),
            list(job.test_regions),
        )
        return FoldOutcome(job, rows, predictions, allocators, audit)

    def run_cv(
        self,
        plan: CVPlan,
        scenario: Scenario,
        specs: Sequence[MethodSpec],
        train_config: TrainConfig,
        fixed_base: Optional[LearnedBase] = None,
    ) -> CVResult:
        """Static methods are evaluated once on the full scenario; learned ones per seed x fold."""
        if fixed_base is not None and any(
            s.integration is Integration.PRIOR_LOSS for s in specs
        ):
            raise MethodSpecError("prior-loss methods need a trained learned base")
        assignment = assign_voronoi(scenario)
        jobs = self.fold_assignment(plan, scenario.region_ids.tolist())
        static = [s for s in specs if s.base is not BaseMethod.LEARNED]
        learned = [s for s in specs if s.base is BaseMethod.LEARNED]

        rows: list[RegionMetricRow] = []
        predictions: dict[tuple[str, int], np.ndarray] = {}
        conserving: dict[str, bool] = {}
        for spec in static:
            prediction = self.run_method(spec, scenario, assignment=assignment)
            conserving[spec.label] = prediction.conserving
            for seed in plan.seeds:
                rows.extend(
                    self.evaluation_service.region_rows(
                        spec.label, prediction.substation_demand, scenario, seed=seed
                    )
                )
                predictions[(spec.label, seed)] = prediction.mean_substation_demand

        audit = [
            AuditRecord(
                seed=job.seed,
                fold=job.fold,
                train_regions=list(job.train_regions),
                test_regions=list(job.test_regions),
            )
            for job in jobs
        ]
        allocators: dict[tuple[int, int, float, float], TrainedAllocator] = {}
        if learned:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                outcomes = list(
                    pool.map(
                        lambda job: self._run_fold(
                            job, scenario, learned, train_config, fixed_base, assignment
                        ),
                        jobs,
                    )
                )
            outcomes.sort(key=lambda o: (plan.seeds.index(o.job.seed), o.job.fold))
            audit = [o.audit for o in outcomes]
            for spec in learned:
                conserving[spec.label] = spec.integration.renormalizes
                for seed in plan.seeds:
                    predictions[(spec.label, seed)] = np.zeros(scenario.n_substations)
            for outcome in outcomes:
                rows.extend(outcome.rows)
                test_mask = np.isin(scenario.substation_region_ids, outcome.job.test_regions)
                for label, values in outcome.predictions.items():
                    predictions[(label, outcome.job.seed)][test_mask] = values[test_mask]
                for key, allocator in outcome.allocators.items():
                    allocators[(outcome.job.seed, outcome.job.fold, *key)] = allocator

        return CVResult(rows, predictions, audit, conserving, allocators)

    def evaluate(
        self,
        plan: CVPlan,
        scenario: Scenario,
        specs: Sequence[MethodSpec],
        train_config: TrainConfig,
        comparisons: Sequence[tuple[str, str]],
        fixed_base: Optional[LearnedBase] = None,
        density_breaks: Optional[tuple[float, float]] = None,
    ) -> tuple[EvalReport, CVResult]:
        """Cross-validate the methods and assemble the evaluation report."""
        result = self.run_cv(plan, scenario, specs, train_config, fixed_base)
        report = self.evaluation_service.build_report(
            result.seed_rows, scenario, comparisons, result.conserving, density_breaks
        )
        updates: dict[str, object] = {
            "n_folds": 1 if plan.single_pass else plan.n_folds,
            "single_pass": plan.single_pass,
            "jackknife": self._jackknife(specs, result, scenario, plan.seeds[0]),
            "weight_probe": self._weight_probe(result, scenario),
        }
        return report.model_copy(update=updates), result

    def _jackknife(
        self, specs: Sequence[MethodSpec], result: CVResult, scenario: Scenario, seed: int
    ) -> list:
        """Leave-one-out correlation of the plain learned (or first) method, smallest region."""
        if not specs:
            return []
        plain = [s for s in specs if s.base is BaseMethod.LEARNED and s.aux == ()]
        spec = plain[0] if plain else specs[0]
        counts = {
            r: len(scenario.region_substation_indices(r)) for r in scenario.region_ids.tolist()
        }
        eligible = [r for r, n in counts.items() if n >= JACKKNIFE_MIN_SUBSTATIONS]
        if not eligible:
            return []
        region_id = min(eligible, key=lambda r: (counts[r], r))
        predicted = result.predictions[(spec.label, seed)]
        return [self.evaluation_service.jackknife(spec.label, predicted, scenario, region_id)]

    def _weight_probe(self, result: CVResult, scenario: Scenario) -> list[WeightProbeSummary]:
        """Within-source Spearman between first-fold learned weights and each factor field."""
        plain = [a for key, a in sorted(result.allocators.items()) if key[2:] == (0.0, 0.0)]
        if not plain:
            return []
        weights = allocation_weights(plain[0].params, scenario, gamma=plain[0].gamma)
        summaries = []
        try:
            factors = {"ntl": ntl_factor(scenario), "prox": prox_factor(scenario)}
        except DegenerateFieldError as exc:
            logger.warning("Weight probe skipped: %s", exc)
            return []
        for name, factor in factors.items():
            probe = probe_weight_factor_correlation(weights, factor)
            summaries.append(
                WeightProbeSummary(
                    factor=name, mean=probe.mean, std=probe.std, n_missing=probe.n_missing
                )
            )
        return summaries

    def run_sweep(
        self,
        sweep: SweepConfig,
        scenario: Scenario,
        plan: CVPlan,
        train_config: TrainConfig,
        fixed_base: Optional[LearnedBase] = None,
    ) -> SweepReport:
        """Intensity sweep; the learned base is trained once on the first seed's first fold.

        Alpha, gamma and beta levels reuse that base; every lambda level retrains.
        """
        assignment = assign_voronoi(scenario)
        region_ids: Sequence[int] = scenario.region_ids.tolist()
        base: Optional[LearnedBase] = None
        train_scenario: Optional[Scenario] = None
        if sweep.base is BaseMethod.LEARNED:
            job = self.fold_assignment(plan, region_ids)[0]
            region_ids = job.test_regions
            train_scenario = scenario.subset(job.train_regions)
            if sweep.axis is not SweepAxis.LAMBDA:
                base = fixed_base or TrainedModelBase(
                    self.training_service.train(train_scenario, train_config, 0.0, 0.0)
                )

        rows = []
        for level in sweep.resolved_levels():
            for column, spec, learned in self._sweep_points(
                sweep, level, base, train_scenario, train_config
            ):
                prediction = self.run_method(spec, scenario, learned, assignment)
                region_rows = self.evaluation_service.region_rows(
                    spec.label, prediction.substation_demand, scenario, region_ids
                )
                summary = self.evaluation_service.summarize(region_rows)[0]
                rows.append(
                    SweepRow(
                        axis=sweep.axis.value,
                        level=level,
                        column=column,
                        rmse=summary.rmse.mean,
                        mae=summary.mae.mean,
                        corr=summary.corr.mean,
                    )
                )
            logger.info("Sweep %s level %g done", sweep.axis.value, level)
        return SweepReport(axis=sweep.axis.value, base=sweep.base.value, rows=rows)

    def _sweep_points(
        self,
        sweep: SweepConfig,
        level: float,
        base: Optional[LearnedBase],
        train_scenario: Optional[Scenario],
        train_config: TrainConfig,
    ) -> list[tuple[str, MethodSpec, Optional[LearnedBase]]]:
        post = Integration.POST_MULTIPLICATIVE
        if sweep.axis is SweepAxis.ALPHA:
            spec = MethodSpec(base=sweep.base, integration=post, aux=(AuxSource.NTL,), alpha=level)
            return [("ntl", spec, base)]
        if sweep.axis is SweepAxis.GAMMA:
            spec = MethodSpec(base=sweep.base, integration=post, aux=(AuxSource.PROX,), gamma=level)
            return [("prox", spec, base)]
        if sweep.axis is SweepAxis.BETA:
            spec = MethodSpec(
                base=sweep.base, integration=post, aux=(AuxSource.NTL, AuxSource.PROX), beta=level
            )
            return [("ntl+prox", spec, base)]

        assert train_scenario is not None
        points = []
        for column, source, lambdas in (
            ("ntl", AuxSource.NTL, (level, 0.0)),
            ("prox", AuxSource.PROX, (0.0, level)),
        ):
            spec = MethodSpec(
                base=BaseMethod.LEARNED,
                integration=Integration.PRIOR_LOSS,
                aux=(source,),
                lam=level,
            )
            allocator = self.training_service.train(train_scenario, train_config, *lambdas)
            points.append((column, spec, TrainedModelBase(allocator)))
        return points
