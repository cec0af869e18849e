"""Configuration and report schemas."""

import re
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from load_disaggregation.domain.services.correction import CorrectionConfig
from load_disaggregation.domain.services.network import LineParameters
from load_disaggregation.domain.value_objects import (
    AuxSource,
    BaseMethod,
    CorrectionMode,
    Integration,
    SweepAxis,
)

MANIFEST_VERSION = 1


# Scenario generation
class SynthConfig(BaseModel):
    """Synthetic ground-truth world."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 42
    n_regions: int = Field(16, ge=1)
    agents_per_region: int = Field(2000, ge=1)
    substations_per_region: int = Field(120, ge=1)
    urbanization_clusters: int = Field(3, ge=1)
    region_size_km: float = Field(20.0, gt=0)
    cluster_width_km: float = Field(2.5, gt=0)
    ntl_fidelity: float = Field(0.7, ge=0, le=1)
    prox_fidelity: float = Field(0.7, ge=0, le=1)
    base_signal: float = Field(0.9, ge=0, le=1)
    base_noise: float = Field(0.4, ge=0)
    base_redundancy: float = Field(0.6, ge=0, le=1)
    demand_noise: float = Field(0.3, ge=0)
    ntl_noise: float = Field(0.2, ge=0)
    landuse_concentration: float = Field(20.0, gt=0)
    substation_jitter_km: float = Field(0.3, ge=0)
    demand_per_agent_mva: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def check_counts(self) -> "SynthConfig":
        if self.substations_per_region > self.agents_per_region:
            raise ValueError("substations_per_region cannot exceed agents_per_region")
        return self


# Learner
class TrainConfig(BaseModel):
    """Cost-model training hyperparameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda_ntl: float = Field(0.05, ge=0)
    lambda_prox: float = Field(0.05, ge=0)
    learning_rate: float = Field(0.5, gt=0)
    max_epochs: int = Field(300, ge=0)
    convergence_tol: float = Field(1e-7, ge=0)
    seed: int = 0
    temperature: float = Field(1.0, gt=0)


# Methods
_BASE_CODES = {BaseMethod.UNIFORM: "Uni", BaseMethod.GPM: "GPM", BaseMethod.LEARNED: "LRN"}
_MODE_CODES = {
    Integration.NONE: "",
    Integration.POST_MULTIPLICATIVE: "post",
    Integration.POST_MULTIPLICATIVE_RAW: "raw",
    Integration.POST_ADDITIVE: "add",
    Integration.POST_NOISE: "noise",
    Integration.PRIOR_LOSS: "prior",
}
_LABEL_PATTERN = re.compile(r"^(Uni|GPM|LRN)(post|raw|add|noise|prior)?(NP|N|P)?$")
_CORRECTION_MODES = {
    Integration.POST_MULTIPLICATIVE: CorrectionMode.MULTIPLICATIVE_RENORM,
    Integration.POST_MULTIPLICATIVE_RAW: CorrectionMode.MULTIPLICATIVE_RAW,
    Integration.POST_ADDITIVE: CorrectionMode.ADDITIVE_RENORM,
    Integration.POST_NOISE: CorrectionMode.NOISE_RENORM,
}


class MethodSpec(BaseModel):
    """One point of the base x integration x auxiliary method space."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Optional[str] = None
    base: BaseMethod
    integration: Integration = Integration.NONE
    aux: tuple[AuxSource, ...] = ()
    alpha: float = Field(1.0, ge=0)
    gamma: float = Field(2.0, ge=0)
    beta: float = Field(1.0, ge=0)
    lam: float = Field(0.05, ge=0)
    additive_gain: float = Field(1.0, ge=0)
    noise_repeats: int = Field(10, ge=1)
    noise_seed: int = 0

    @field_validator("aux")
    @classmethod
    def canonical_aux(cls, value: tuple[AuxSource, ...]) -> tuple[AuxSource, ...]:
        order = list(AuxSource)
        return tuple(sorted(set(value), key=order.index))

    @model_validator(mode="after")
    def check_axes(self) -> "MethodSpec":
        if self.integration is Integration.PRIOR_LOSS and self.base is not BaseMethod.LEARNED:
            raise ValueError("prior-loss integration requires the learned base")
        if self.integration is Integration.NONE and self.aux:
            raise ValueError("auxiliary sources need an integration route")
        if self.integration is not Integration.NONE and not self.aux:
            raise ValueError(f"integration '{self.integration.value}' needs auxiliary sources")
        return self

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        mode = _MODE_CODES[self.integration]
        if self.base is BaseMethod.UNIFORM and self.integration is Integration.POST_MULTIPLICATIVE:
            mode = ""
        aux = "".join("N" if a is AuxSource.NTL else "P" for a in self.aux)
        return f"{_BASE_CODES[self.base]}{mode}{aux}"

    @property
    def uses_ntl(self) -> bool:
        return AuxSource.NTL in self.aux

    @property
    def uses_prox(self) -> bool:
        return AuxSource.PROX in self.aux

    @property
    def prior_lambdas(self) -> tuple[float, float]:
        """(lambda_ntl, lambda_prox) the learned base must be trained with."""
        if self.integration is not Integration.PRIOR_LOSS:
            return (0.0, 0.0)
        return (self.lam if self.uses_ntl else 0.0, self.lam if self.uses_prox else 0.0)

    def correction_config(self) -> Optional[CorrectionConfig]:
        mode = _CORRECTION_MODES.get(self.integration)
        if mode is None:
            return None
        return CorrectionConfig(
            mode=mode,
            noise_repeats=self.noise_repeats,
            noise_seed=self.noise_seed,
            additive_gain=self.additive_gain,
        )

    @classmethod
    def from_label(cls, label: str, **overrides: object) -> "MethodSpec":
        """Parse labels such as ``Uni``, ``UniNP``, ``GPMpostN``, ``LRNpriorP`` or ``GPMaddNP``."""
        match = _LABEL_PATTERN.match(label)
        if match is None:
            raise ValueError(f"Unknown method label '{label}'")
        base_code, mode_code, aux_code = match.groups()
        base = next(b for b, code in _BASE_CODES.items() if code == base_code)
        if mode_code is None:
            integration = Integration.POST_MULTIPLICATIVE if aux_code else Integration.NONE
        else:
            integration = next(i for i, code in _MODE_CODES.items() if code == mode_code)
        if integration is Integration.POST_NOISE and aux_code is None:
            aux_code = "NP"
        aux = tuple(
            source
            for letter, source in (("N", AuxSource.NTL), ("P", AuxSource.PROX))
            if aux_code and letter in aux_code
        )
        spec = cls(
            base=base, integration=integration, aux=aux, **overrides  # type: ignore[arg-type]
        )
        if spec.label != label:
            return spec.model_copy(update={"name": label})
        return spec


TABLE1_LABELS: tuple[str, ...] = (
    "Uni", "UniP", "UniN", "UniNP",
    "GPM", "GPMpostP", "GPMpostN", "GPMpostNP",
    "LRN", "LRNpostP", "LRNpostN", "LRNpostNP",
    "LRNpriorP", "LRNpriorN", "LRNpriorNP",
)  # fmt: skip

PLANNED_COMPARISONS: tuple[tuple[str, str], ...] = (
    ("LRN", "GPM"),
    ("LRNpostP", "LRN"),
    ("LRNpostN", "LRN"),
    ("LRNpostNP", "LRNpostP"),
    ("GPMpostNP", "GPMpostN"),
    ("GPMpostP", "GPM"),
    ("GPMpostNP", "GPMpostP"),
    ("LRNpriorN", "LRN"),
    ("LRNpostP", "GPMpostNP"),
)


def table1_specs() -> list[MethodSpec]:
    return [MethodSpec.from_label(label) for label in TABLE1_LABELS]


class CVPlan(BaseModel):
    """Seeded spatial cross-validation over regions."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    seeds: tuple[int, ...] = (42, 123, 456)
    n_folds: int = Field(4, ge=1)
    single_pass: bool = False

    @field_validator("seeds")
    @classmethod
    def distinct_seeds(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("at least one seed is required")
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value


# Sweeps
DEFAULT_SWEEP_LEVELS: dict[SweepAxis, tuple[float, ...]] = {
    SweepAxis.ALPHA: (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0),
    SweepAxis.GAMMA: (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0),
    SweepAxis.BETA: (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5),
    SweepAxis.LAMBDA: (0.01, 0.05, 0.1, 0.2, 0.5),
}


class SweepConfig(BaseModel):
    """Intensity sweep along one axis."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    axis: SweepAxis
    levels: Optional[tuple[float, ...]] = None
    base: BaseMethod = BaseMethod.LEARNED

    @field_validator("levels")
    @classmethod
    def check_levels(cls, value: Optional[tuple[float, ...]]) -> Optional[tuple[float, ...]]:
        if value is not None:
            if not value:
                raise ValueError("levels must be nonempty")
            if any(level < 0 for level in value):
                raise ValueError("levels must be >= 0")
        return value

    @model_validator(mode="after")
    def check_base(self) -> "SweepConfig":
        if self.axis is SweepAxis.LAMBDA and self.base is not BaseMethod.LEARNED:
            raise ValueError("the lambda sweep needs the learned base")
        return self

    def resolved_levels(self) -> tuple[float, ...]:
        return self.levels if self.levels is not None else DEFAULT_SWEEP_LEVELS[self.axis]


# Power flow
class LineConfig(BaseModel):
    """Editable conductor and per-unit parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    r_ohm_per_km: float = Field(0.194, gt=0)
    x_ohm_per_km: float = Field(0.41, gt=0)
    c_nf_per_km: float = Field(8.75, ge=0)
    rating_ka: float = Field(0.47, gt=0)
    frequency_hz: float = Field(50.0, gt=0)
    v_base_kv: float = Field(110.0, gt=0)
    s_base_mva: float = Field(100.0, gt=0)
    slack_voltage_pu: float = Field(1.02, gt=0)
    include_shunt: bool = False

    def to_domain(self) -> LineParameters:
        return LineParameters(**self.model_dump())


class PowerFlowConfig(BaseModel):
    """Power-flow validation of selected methods on one region."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    region_id: Optional[int] = None
    power_factor: float = Field(0.95, gt=0, le=1)
    methods: tuple[str, ...] = ("Uni", "GPM", "LRN", "LRNpostNP", "LRNpriorNP")
    line: LineConfig = LineConfig()


# Manifest
class Manifest(BaseModel):
    """Declarative experiment definition."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    version: int = MANIFEST_VERSION
    scenario: Optional[Path] = None
    synthetic: Optional[SynthConfig] = None
    output_dir: Optional[Path] = None
    plan: CVPlan = CVPlan()
    train: TrainConfig = TrainConfig()
    learned_base: Literal["trained", "informed"] = "trained"
    methods: tuple[Union[str, MethodSpec], ...] = Field(..., min_length=1)
    comparisons: Optional[tuple[tuple[str, str], ...]] = None
    sweeps: tuple[SweepConfig, ...] = ()
    powerflow: Optional[PowerFlowConfig] = None
    workers: Optional[int] = Field(None, ge=1)
    density_breaks: Optional[tuple[float, float]] = None

    @model_validator(mode="after")
    def check_manifest(self) -> "Manifest":
        if self.version != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {self.version}")
        if (self.scenario is None) == (self.synthetic is None):
            raise ValueError("exactly one of 'scenario' and 'synthetic' is required")
        labels = [spec.label for spec in self.resolved_methods()]
        if len(set(labels)) != len(labels):
            raise ValueError("method labels must be unique")
        if self.density_breaks is not None:
            low, high = self.density_breaks
            if not 0 <= low < high:
                raise ValueError("density_breaks must satisfy 0 <= low < high")
        if self.learned_base == "informed":
            if any(s.integration is Integration.PRIOR_LOSS for s in self.resolved_methods()):
                raise ValueError("prior-loss methods need learned_base 'trained'")
            if any(s.axis is SweepAxis.LAMBDA for s in self.sweeps):
                raise ValueError("the lambda sweep needs learned_base 'trained'")
        return self

    def resolved_methods(self) -> list[MethodSpec]:
        return [
            MethodSpec.from_label(m) if isinstance(m, str) else m for m in self.methods
        ]

    def resolved_comparisons(self) -> tuple[tuple[str, str], ...]:
        return self.comparisons if self.comparisons is not None else PLANNED_COMPARISONS


# Reports
class RegionMetricRow(BaseModel):
    """Metrics of one method in one region (seed-averaged unless ``seed`` is set)."""

    method: str
    region_id: int
    seed: Optional[int] = None
    rmse: float
    mae: float
    corr: Optional[float] = None


class MetricSummary(BaseModel):
    mean: Optional[float] = None
    std: Optional[float] = None
    n: int = 0
    n_missing: int = 0


class MethodSummary(BaseModel):
    """Mean and inter-region spread of a method's metrics."""

    method: str
    conserving: bool = True
    rmse: MetricSummary
    mae: MetricSummary
    corr: MetricSummary


class ComparisonResult(BaseModel):
    """Paired Wilcoxon test of method_a against method_b on one metric."""

    method_a: str
    method_b: str
    metric: str
    alternative: str = "two-sided"
    n: int = 0
    per_seed_p: list[Optional[float]] = []
    per_seed_p_adjusted: list[Optional[float]] = []
    median_p: Optional[float] = None
    median_p_adjusted: Optional[float] = None
    averaged_statistic: Optional[float] = None
    averaged_p: Optional[float] = None
    averaged_p_adjusted: Optional[float] = None
    degenerate: bool = False
    note: Optional[str] = None


class StratumRow(BaseModel):
    method: str
    density: str
    diversity: str
    mean_rmse: Optional[float] = None
    n: int = 0


class JackknifeSummary(BaseModel):
    method: str
    region_id: int
    estimates: list[Optional[float]]
    minimum: Optional[float] = None
    std: Optional[float] = None
    argmin: Optional[int] = None


class MarginalEffectRow(BaseModel):
    route: str
    aux: str
    base_method: str
    augmented_method: str
    base_rmse: float
    augmented_rmse: float
    delta: float
    percent: float


class MechanismRow(BaseModel):
    """One row of the mechanism-isolation table."""

    group: str
    method: str
    rmse: Optional[float] = None
    delta: Optional[float] = None
    percent: Optional[float] = None
    mae: Optional[float] = None
    corr: Optional[float] = None


class FactorCorrelation(BaseModel):
    pearson: Optional[float] = None
    spearman: Optional[float] = None
    per_region_spearman: dict[int, Optional[float]] = {}
    densest_region: Optional[int] = None
    rural_region: Optional[int] = None


class WeightProbeSummary(BaseModel):
    factor: str
    mean: Optional[float] = None
    std: Optional[float] = None
    n_missing: int = 0


class AuditRecord(BaseModel):
    """Regions used to train and test one seed x fold job."""

    seed: int
    fold: int
    train_regions: list[int]
    test_regions: list[int]
    models: list[str] = []


class EvalReport(BaseModel):
    """Machine-readable outcome of an evaluation run."""

    version: int = MANIFEST_VERSION
    seeds: list[int] = []
    n_folds: int = 0
    single_pass: bool = False
    methods: list[MethodSummary] = []
    regions: list[RegionMetricRow] = []
    comparisons: list[ComparisonResult] = []
    strata: list[StratumRow] = []
    jackknife: list[JackknifeSummary] = []
    marginal_effects: list[MarginalEffectRow] = []
    mechanism: list[MechanismRow] = []
    factor_correlation: Optional[FactorCorrelation] = None
    weight_probe: list[WeightProbeSummary] = []

    def summary(self, method: str) -> MethodSummary:
        for entry in self.methods:
            if entry.method == method:
                return entry
        raise KeyError(method)

    def method_labels(self) -> list[str]:
        return [entry.method for entry in self.methods]


class SweepRow(BaseModel):
    axis: str
    level: float
    column: str
    rmse: float
    mae: float
    corr: Optional[float] = None


class SweepReport(BaseModel):
    axis: str
    base: str
    rows: list[SweepRow] = []


class PowerFlowRow(BaseModel):
    method: str
    delta_mae_pp: float
    max_loading_pct: float
    converged: bool
    max_mismatch_pu: float


class PowerFlowReport(BaseModel):
    region_id: int
    n_buses: int
    n_lines: int
    power_factor: float
    rows: list[PowerFlowRow] = []
