"""Error metrics, correlation estimators and paired significance tests."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from load_disaggregation.domain.entities import RegionMetrics
from load_disaggregation.domain.exceptions import FieldValidationError, InsufficientSampleError
from load_disaggregation.domain.value_objects import Alternative

EXACT_MAX_N = 20
WILCOXON_MIN_N = 5


def _paired(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if x_arr.shape != y_arr.shape or x_arr.ndim != 1:
        raise FieldValidationError(
            f"Paired vectors must have equal length ({x_arr.shape} vs {y_arr.shape})"
        )
    return x_arr, y_arr


def _linear_corr(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    if x.size < 2:
        return None
    xd = x - x.mean()
    yd = y - y.mean()
    denominator = np.sqrt(np.sum(xd * xd) * np.sum(yd * yd))
    if denominator == 0 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    return float(np.clip(np.sum(xd * yd) / denominator, -1.0, 1.0))


def region_metrics(
    predicted: Sequence[float], actual: Sequence[float], region_id: int = 0
) -> RegionMetrics:
    """RMSE, MAE and Pearson correlation of one region's substations.

    Correlation is missing when either vector has zero variance.
    """
    p, a = _paired(predicted, actual)
    if p.size == 0:
        raise InsufficientSampleError(f"Region {region_id} has no substations")
    residual = p - a
    rmse = float(np.sqrt(np.mean(residual**2)))
    mae = float(np.mean(np.abs(residual)))
    return RegionMetrics(region_id=region_id, rmse=rmse, mae=mae, corr=_linear_corr(p, a))


def pearson(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Pearson correlation; None when either input is constant."""
    x_arr, y_arr = _paired(x, y)
    if x_arr.size < 3:
        raise InsufficientSampleError("Correlation needs at least 3 pairs")
    if np.ptp(x_arr) == 0 or np.ptp(y_arr) == 0:
        return None
    return float(stats.pearsonr(x_arr, y_arr).statistic)


def spearman(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Spearman rank correlation with average ranks for ties; None when constant."""
    x_arr, y_arr = _paired(x, y)
    if x_arr.size < 3:
        raise InsufficientSampleError("Correlation needs at least 3 pairs")
    if np.ptp(x_arr) == 0 or np.ptp(y_arr) == 0:
        return None
    return float(stats.spearmanr(x_arr, y_arr).statistic)


@dataclass(frozen=True)
class MarginalEffect:
    """Change in aggregate RMSE from adding auxiliary information to a base."""

    delta: float
    percent: float


def marginal_effect(base_rmse: float, augmented_rmse: float) -> MarginalEffect:
    delta = augmented_rmse - base_rmse
    percent = 100.0 * delta / base_rmse if base_rmse != 0 else 0.0
    return MarginalEffect(delta=delta, percent=percent)


@dataclass(frozen=True)
class WilcoxonResult:
    """Outcome of a Wilcoxon signed-rank test."""

    statistic: float
    p_value: float
    n: int
    method: str
    alternative: Alternative = Alternative.TWO_SIDED
    degenerate: bool = False


def _exact_null(doubled_ranks: np.ndarray) -> np.ndarray:
    """Null distribution of 2*T+ over all 2^n sign assignments."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks.tolist():
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts / 2.0 ** len(doubled_ranks)


def wilcoxon_signed_rank(
    paired_a: Sequence[float],
    paired_b: Sequence[float],
    alternative: Alternative = Alternative.TWO_SIDED,
) -> WilcoxonResult:
    """Wilcoxon signed-rank test on a - b.

    Zero differences are dropped. Up to 20 pairs the p-value comes from the
    exact null distribution (tied ranks included); above that from the normal
    approximation with tie and continuity corrections. The statistic is T+.
    """
    a, b = _paired(paired_a, paired_b)
    diff = a - b
    diff = diff[diff != 0]
    n = int(diff.size)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate", alternative, degenerate=True)
    if n < WILCOXON_MIN_N:
        raise InsufficientSampleError(
            f"Wilcoxon test needs >= {WILCOXON_MIN_N} nonzero differences, got {n}"
        )

    ranks = stats.rankdata(np.abs(diff))
    t_plus = float(ranks[diff > 0].sum())

    if n <= EXACT_MAX_N:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        null = _exact_null(doubled)
        observed = int(round(2.0 * t_plus))
        p_upper = float(null[observed:].sum())
        p_lower = float(null[: observed + 1].sum())
        method = "exact"
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        variance = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
        sd = np.sqrt(variance)
        p_upper = float(stats.norm.sf((t_plus - mean - 0.5) / sd))
        p_lower = float(stats.norm.cdf((t_plus - mean + 0.5) / sd))
        method = "normal"

    if alternative is Alternative.GREATER:
        p_value = p_upper
    elif alternative is Alternative.LESS:
        p_value = p_lower
    else:
        p_value = 2.0 * min(p_upper, p_lower)
    return WilcoxonResult(t_plus, min(1.0, p_value), n, method, alternative)


def holm_bonferroni(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, returned in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return []
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise FieldValidationError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    stepped = (m - np.arange(m)) * p[order]
    adjusted_sorted = np.minimum(np.maximum.accumulate(stepped), 1.0)
    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted
    return adjusted.tolist()


def shannon_entropy(proportions: Sequence[float]) -> float:
    """Shannon entropy in nats; zero components contribute nothing."""
    p = np.asarray(proportions, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class JackknifeResult:
    """Leave-one-out correlation estimates."""

    estimates: tuple[Optional[float], ...]
    minimum: Optional[float]
    std: Optional[float]
    argmin: Optional[int]


def jackknife_loo_corr(predicted: Sequence[float], actual: Sequence[float]) -> JackknifeResult:
    """Pearson correlation recomputed with each pair left out in turn."""
    p, a = _paired(predicted, actual)
    if p.size < 4:
        raise InsufficientSampleError("Jackknife needs at least 4 pairs")
    keep = ~np.eye(p.size, dtype=bool)
    estimates = tuple(_linear_corr(p[mask], a[mask]) for mask in keep)
    present = [(i, r) for i, r in enumerate(estimates) if r is not None]
    if not present:
        return JackknifeResult(estimates, None, None, None)
    argmin, minimum = min(present, key=lambda item: item[1])
    values = np.array([r for _, r in present])
    return JackknifeResult(estimates, minimum, float(values.std()), argmin)
