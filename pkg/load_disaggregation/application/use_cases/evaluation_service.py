"""Evaluation use cases: metric aggregation, planned comparisons and breakdowns."""

import logging
from collections import defaultdict
from typing import Iterable, Optional, Sequence

import numpy as np

from load_disaggregation.application.dto.schemas import (
    ComparisonResult,
    EvalReport,
    FactorCorrelation,
    JackknifeSummary,
    MarginalEffectRow,
    MechanismRow,
    MethodSummary,
    MetricSummary,
    RegionMetricRow,
    StratumRow,
)
from load_disaggregation.domain.entities import Scenario
from load_disaggregation.domain.exceptions import (
    DegenerateFieldError,
    InsufficientSampleError,
    RegionMismatchError,
)
from load_disaggregation.domain.services.auxiliary import ntl_factor, prox_factor
from load_disaggregation.domain.services.statistics import (
    MarginalEffect,
    holm_bonferroni,
    jackknife_loo_corr,
    marginal_effect,
    pearson,
    region_metrics,
    shannon_entropy,
    spearman,
    wilcoxon_signed_rank,
)
from load_disaggregation.domain.value_objects import Alternative

logger = logging.getLogger(__name__)

METRICS = ("rmse", "mae", "corr")

MARGINAL_ROUTES: tuple[tuple[str, str, str], ...] = (
    ("Uniform post", "Uni", "Uni"),
    ("GPM post", "GPM", "GPMpost"),
    ("Learned post", "LRN", "LRNpost"),
    ("Learned prior", "LRN", "LRNprior"),
)
MARGINAL_AUX = (("NTL", "N"), ("Prox", "P"), ("NTL+Prox", "NP"))

MECHANISM_GROUPS: tuple[tuple[str, str], ...] = (
    ("Mult.+renorm", "post"),
    ("No-renorm", "raw"),
    ("Random noise", "noise"),
    ("Additive", "add"),
)


def _mean_optional(values: Iterable[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _metric_summary(values: Sequence[Optional[float]]) -> MetricSummary:
    present = np.array([v for v in values if v is not None], dtype=float)
    n_missing = len(values) - present.size
    if present.size == 0:
        return MetricSummary(n=0, n_missing=n_missing)
    std = float(present.std(ddof=1)) if present.size > 1 else None
    return MetricSummary(
        mean=float(present.mean()), std=std, n=int(present.size), n_missing=n_missing
    )


class EvaluationService:
    """Service turning per-region metric rows into an evaluation report."""

    def region_rows(
        self,
        method: str,
        predicted: Sequence[np.ndarray],
        scenario: Scenario,
        region_ids: Optional[Iterable[int]] = None,
        seed: Optional[int] = None,
    ) -> list[RegionMetricRow]:
        """Metrics per region; several predictions (noise repeats) are averaged metric-wise."""
        regions = scenario.region_ids.tolist() if region_ids is None else sorted(region_ids)
        rows = []
        for region_id in regions:
            idx = scenario.region_substation_indices(region_id)
            actual = scenario.substation_demand[idx]
            metrics = [region_metrics(p[idx], actual, region_id) for p in predicted]
            rows.append(
                RegionMetricRow(
                    method=method,
                    region_id=region_id,
                    seed=seed,
                    rmse=float(np.mean([m.rmse for m in metrics])),
                    mae=float(np.mean([m.mae for m in metrics])),
                    corr=_mean_optional(m.corr for m in metrics),
                )
            )
        return rows

    def seed_average(self, rows: Sequence[RegionMetricRow]) -> list[RegionMetricRow]:
        """Average each (method, region) over seeds; order by method then region id."""
        grouped: dict[tuple[str, int], list[RegionMetricRow]] = defaultdict(list)
        for row in rows:
            grouped[(row.method, row.region_id)].append(row)
        averaged = []
        for (method, region_id), group in grouped.items():
            averaged.append(
                RegionMetricRow(
                    method=method,
                    region_id=region_id,
                    rmse=float(np.mean([r.rmse for r in group])),
                    mae=float(np.mean([r.mae for r in group])),
                    corr=_mean_optional(r.corr for r in group),
                )
            )
        order = {m: i for i, m in enumerate(dict.fromkeys(r.method for r in rows))}
        return sorted(averaged, key=lambda r: (order[r.method], r.region_id))

    def summarize(
        self, averaged: Sequence[RegionMetricRow], conserving: Optional[dict[str, bool]] = None
    ) -> list[MethodSummary]:
        """Mean and inter-region std (ddof=1) of seed-averaged metrics."""
        by_method: dict[str, list[RegionMetricRow]] = defaultdict(list)
        for row in averaged:
            by_method[row.method].append(row)
        summaries = []
        for method, group in by_method.items():
            group = sorted(group, key=lambda r: r.region_id)
            summaries.append(
                MethodSummary(
                    method=method,
                    conserving=(conserving or {}).get(method, True),
                    rmse=_metric_summary([r.rmse for r in group]),
                    mae=_metric_summary([r.mae for r in group]),
                    corr=_metric_summary([r.corr for r in group]),
                )
            )
        return summaries

    @staticmethod
    def _paired(
        rows: Sequence[RegionMetricRow], a: str, b: str, metric: str
    ) -> tuple[list[float], list[float]]:
        values: dict[str, dict[int, Optional[float]]] = {a: {}, b: {}}
        for row in rows:
            if row.method in values:
                values[row.method][row.region_id] = getattr(row, metric)
        shared = sorted(set(values[a]) & set(values[b]))
        pairs = [
            (values[a][r], values[b][r])
            for r in shared
            if values[a][r] is not None and values[b][r] is not None
        ]
        return [float(x) for x, _ in pairs], [float(y) for _, y in pairs]

    def _test_family(
        self,
        rows: Sequence[RegionMetricRow],
        pairs: Sequence[tuple[str, str]],
        metric: str,
        alternative: Alternative,
    ) -> tuple[list[Optional[float]], list[Optional[float]], list[Optional[float]], list[int]]:
        """Raw and Holm-adjusted p-values of one family of comparisons on one metric."""
        raw: list[Optional[float]] = []
        statistics: list[Optional[float]] = []
        sizes: list[int] = []
        for a, b in pairs:
            x, y = self._paired(rows, a, b, metric)
            try:
                if not x:
                    raise InsufficientSampleError(f"no paired {metric} values")
                result = wilcoxon_signed_rank(x, y, alternative)
                raw.append(result.p_value)
                statistics.append(result.statistic)
                sizes.append(result.n)
            except InsufficientSampleError:
                raw.append(None)
                statistics.append(None)
                sizes.append(len(x))
        tested = [i for i, p in enumerate(raw) if p is not None]
        adjusted: list[Optional[float]] = [None] * len(raw)
        present = [float(raw[i]) for i in tested]  # type: ignore[arg-type]
        for i, p_adj in zip(tested, holm_bonferroni(present)):
            adjusted[i] = p_adj
        return raw, adjusted, statistics, sizes

    def compare(
        self,
        seed_rows: Sequence[RegionMetricRow],
        comparisons: Sequence[tuple[str, str]],
        alternative: Alternative = Alternative.TWO_SIDED,
    ) -> list[ComparisonResult]:
        """Planned comparisons per metric: Holm within each seed, median over seeds.

        The same family is also tested once on seed-averaged metrics.
        """
        methods = {row.method for row in seed_rows}
        present = [(a, b) for a, b in comparisons if a in methods and b in methods]
        skipped = [(a, b) for a, b in comparisons if (a, b) not in present]
        if skipped:
            logger.info("Skipping comparisons with absent methods: %s", skipped)
        if not present:
            return []

        seeds = sorted({row.seed for row in seed_rows if row.seed is not None})
        averaged = self.seed_average(seed_rows)
        results = []
        for metric in METRICS:
            per_seed = [
                self._test_family(
                    [r for r in seed_rows if r.seed == seed], present, metric, alternative
                )
                for seed in seeds
            ]
            avg_raw, avg_adj, avg_stat, avg_n = self._test_family(
                averaged, present, metric, alternative
            )
            for k, (a, b) in enumerate(present):
                raw_k = [family[0][k] for family in per_seed]
                adj_k = [family[1][k] for family in per_seed]
                x, y = self._paired(averaged, a, b, metric)
                degenerate = len(x) > 0 and all(u == v for u, v in zip(x, y))
                note = None
                if avg_raw[k] is None:
                    note = f"fewer than 5 nonzero differences ({avg_n[k]})"
                results.append(
                    ComparisonResult(
                        method_a=a,
                        method_b=b,
                        metric=metric,
                        alternative=alternative.value,
                        n=avg_n[k],
                        per_seed_p=raw_k,
                        per_seed_p_adjusted=adj_k,
                        median_p=_median_optional(raw_k),
                        median_p_adjusted=_median_optional(adj_k),
                        averaged_statistic=avg_stat[k],
                        averaged_p=avg_raw[k],
                        averaged_p_adjusted=avg_adj[k],
                        degenerate=degenerate,
                        note=note,
                    )
                )
        return results

    def stratify(
        self,
        averaged: Sequence[RegionMetricRow] | EvalReport,
        scenario: Scenario,
        density_breaks: Optional[tuple[float, float]] = None,
        entropy_break: Optional[float] = None,
    ) -> list[StratumRow]:
        """Mean RMSE per (load-density class x land-use diversity class) cell.

        Density is D_r / area; diversity is the natural-log entropy of the
        region-mean land-use vector. Default breaks are the density terciles and
        the entropy median of the scenario.
        """
        if isinstance(averaged, EvalReport):
            averaged = averaged.regions
        density = scenario.region_demand / scenario.region_area
        entropy = np.array(
            [
                shannon_entropy(scenario.landuse[scenario.region_agent_indices(r)].mean(axis=0))
                for r in scenario.region_ids.tolist()
            ]
        )
        low, high = density_breaks or tuple(np.quantile(density, [1 / 3, 2 / 3]).tolist())
        split = float(np.median(entropy)) if entropy_break is None else entropy_break

        density_class = {}
        diversity_class = {}
        for i, region_id in enumerate(scenario.region_ids.tolist()):
            if density[i] <= low:
                density_class[region_id] = "low"
            elif density[i] >= high:
                density_class[region_id] = "high"
            else:
                density_class[region_id] = "mid"
            diversity_class[region_id] = "low" if entropy[i] <= split else "high"

        cells: dict[tuple[str, str, str], list[float]] = defaultdict(list)
        for row in averaged:
            key = (row.method, density_class[row.region_id], diversity_class[row.region_id])
            cells[key].append(row.rmse)
        methods = list(dict.fromkeys(row.method for row in averaged))
        table = []
        for method in methods:
            for d in ("low", "mid", "high"):
                for h in ("low", "high"):
                    values = cells.get((method, d, h), [])
                    table.append(
                        StratumRow(
                            method=method,
                            density=d,
                            diversity=h,
                            mean_rmse=float(np.mean(values)) if values else None,
                            n=len(values),
                        )
                    )
        return table

    def marginal_effect(
        self,
        averaged: Sequence[RegionMetricRow],
        base_method: str,
        augmented_method: str,
    ) -> MarginalEffect:
        """Delta of aggregate RMSE between two methods evaluated on the same regions."""
        base = {r.region_id: r.rmse for r in averaged if r.method == base_method}
        augmented = {r.region_id: r.rmse for r in averaged if r.method == augmented_method}
        if not base or set(base) != set(augmented):
            raise RegionMismatchError(
                f"'{base_method}' and '{augmented_method}' cover different regions"
            )
        regions = sorted(base)
        return marginal_effect(
            float(np.mean([base[r] for r in regions])),
            float(np.mean([augmented[r] for r in regions])),
        )

    def marginal_table(self, averaged: Sequence[RegionMetricRow]) -> list[MarginalEffectRow]:
        methods = {row.method for row in averaged}
        rows = []
        for route, base, prefix in MARGINAL_ROUTES:
            if base not in methods:
                continue
            for aux_name, aux_code in MARGINAL_AUX:
                augmented = f"{prefix}{aux_code}"
                if augmented not in methods:
                    continue
                effect = self.marginal_effect(averaged, base, augmented)
                base_rmse = self._aggregate_rmse(averaged, base)
                rows.append(
                    MarginalEffectRow(
                        route=route,
                        aux=aux_name,
                        base_method=base,
                        augmented_method=augmented,
                        base_rmse=base_rmse,
                        augmented_rmse=base_rmse + effect.delta,
                        delta=effect.delta,
                        percent=effect.percent,
                    )
                )
        return rows

    @staticmethod
    def _aggregate_rmse(averaged: Sequence[RegionMetricRow], method: str) -> float:
        return float(np.mean([r.rmse for r in averaged if r.method == method]))

    def mechanism_table(self, summaries: Sequence[MethodSummary]) -> list[MechanismRow]:
        """Mechanism-isolation rows for every base whose alternative mechanisms were run."""
        by_label = {s.method: s for s in summaries}
        rows = []
        for base in ("Uni", "GPM", "LRN"):
            variants = [
                (group, f"{base}{mode}{aux}")
                for group, mode in MECHANISM_GROUPS
                for aux in (("",) if mode == "noise" else ("NP", "N", "P"))
            ]
            if base == "Uni":
                variants = [(g, m.replace("Unipost", "Uni")) for g, m in variants]
            alternatives = [v for v in variants if v[1] in by_label and v[0] != "Mult.+renorm"]
            if base not in by_label or not alternatives:
                continue
            baseline = by_label[base].rmse.mean
            rows.append(self._mechanism_row("Baseline", by_label[base], baseline))
            rows.extend(
                self._mechanism_row(group, by_label[label], baseline)
                for group, label in variants
                if label in by_label
            )
        return rows

    @staticmethod
    def _mechanism_row(
        group: str, summary: MethodSummary, baseline: Optional[float]
    ) -> MechanismRow:
        rmse = summary.rmse.mean
        delta = percent = None
        if rmse is not None and baseline is not None:
            effect = marginal_effect(baseline, rmse)
            delta, percent = effect.delta, effect.percent
        return MechanismRow(
            group=group,
            method=summary.method,
            rmse=rmse,
            delta=delta,
            percent=percent,
            mae=summary.mae.mean,
            corr=summary.corr.mean,
        )

    def factor_correlation(self, scenario: Scenario) -> FactorCorrelation:
        """Agreement between the NTL and Proximity factor fields."""
        ntl = ntl_factor(scenario).factor
        prox = prox_factor(scenario).aligned_to(scenario.agent_ids)
        per_region: dict[int, Optional[float]] = {}
        for region_id in scenario.region_ids.tolist():
            idx = scenario.region_agent_indices(region_id)
            try:
                per_region[region_id] = spearman(ntl[idx], prox[idx])
            except InsufficientSampleError:
                per_region[region_id] = None
        density = scenario.region_demand / scenario.region_area
        return FactorCorrelation(
            pearson=pearson(ntl, prox),
            spearman=spearman(ntl, prox),
            per_region_spearman=per_region,
            densest_region=int(scenario.region_ids[int(np.argmax(density))]),
            rural_region=int(scenario.region_ids[int(np.argmin(density))]),
        )

    def jackknife(
        self, method: str, predicted: np.ndarray, scenario: Scenario, region_id: int
    ) -> JackknifeSummary:
        idx = scenario.region_substation_indices(region_id)
        result = jackknife_loo_corr(predicted[idx], scenario.substation_demand[idx])
        return JackknifeSummary(
            method=method,
            region_id=region_id,
            estimates=list(result.estimates),
            minimum=result.minimum,
            std=result.std,
            argmin=result.argmin,
        )

    def build_report(
        self,
        seed_rows: Sequence[RegionMetricRow],
        scenario: Scenario,
        comparisons: Sequence[tuple[str, str]],
        conserving: Optional[dict[str, bool]] = None,
        density_breaks: Optional[tuple[float, float]] = None,
    ) -> EvalReport:
        averaged = self.seed_average(seed_rows)
        summaries = self.summarize(averaged, conserving)
        return EvalReport(
            seeds=sorted({r.seed for r in seed_rows if r.seed is not None}),
            methods=summaries,
            regions=averaged,
            comparisons=self.compare(seed_rows, comparisons),
            strata=self.stratify(averaged, scenario, density_breaks),
            marginal_effects=self.marginal_table(averaged),
            mechanism=self.mechanism_table(summaries),
            factor_correlation=self._safe_factor_correlation(scenario),
        )

    def _safe_factor_correlation(self, scenario: Scenario) -> Optional[FactorCorrelation]:
        try:
            return self.factor_correlation(scenario)
        except DegenerateFieldError as exc:
            logger.warning("Factor correlation skipped: %s", exc)
            return None


def _median_optional(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.median(present)) if present else None
