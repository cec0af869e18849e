"""Text rendering of stored evaluation, sweep and power-flow reports."""

from typing import Optional, Sequence

import pandas as pd

from load_disaggregation.application.dto.schemas import (
    EvalReport,
    MetricSummary,
    PowerFlowReport,
    SweepReport,
)


def _fmt(value: Optional[float], digits: int = 3) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _mean_std(summary: MetricSummary) -> str:
    if summary.mean is None:
        return "-"
    if summary.std is None:
        return _fmt(summary.mean)
    return f"{summary.mean:.3f} ± {summary.std:.3f}"


class ReportService:
    """Builds the method matrix, comparison, mechanism and auxiliary tables."""

    def method_matrix(self, report: EvalReport) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "Method": s.method + ("" if s.conserving else " *"),
                    "RMSE": _mean_std(s.rmse),
                    "MAE": _mean_std(s.mae),
                    "Corr": _mean_std(s.corr),
                    "Regions": s.rmse.n,
                }
                for s in report.methods
            ]
        )

    def comparison_table(self, report: EvalReport) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "A": c.method_a,
                    "B": c.method_b,
                    "Metric": c.metric,
                    "n": c.n,
                    "Median p (Holm)": _fmt(c.median_p_adjusted, 4),
                    "Averaged p (Holm)": _fmt(c.averaged_p_adjusted, 4),
                    "Note": c.note or "",
                }
                for c in report.comparisons
            ]
        )

    def mechanism_table(self, report: EvalReport) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "Group": m.group,
                    "Method": m.method,
                    "RMSE": _fmt(m.rmse),
                    "ΔRMSE": _fmt(m.delta, 2),
                    "Δ%": _fmt(m.percent, 1),
                    "MAE": _fmt(m.mae),
                    "Corr": _fmt(m.corr),
                }
                for m in report.mechanism
            ]
        )

    def marginal_table(self, report: EvalReport) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "Route": m.route,
                    "Aux": m.aux,
                    "Base RMSE": _fmt(m.base_rmse, 2),
                    "Augmented RMSE": _fmt(m.augmented_rmse, 2),
                    "ΔRMSE": f"{m.delta:+.2f} ({m.percent:+.1f}%)",
                }
                for m in report.marginal_effects
            ]
        )

    def sweep_table(self, report: SweepReport) -> pd.DataFrame:
        frame = pd.DataFrame([row.model_dump() for row in report.rows])
        if frame.empty:
            return frame
        return frame.pivot(index="level", columns="column", values="rmse").reset_index()

    def powerflow_table(self, report: PowerFlowReport) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "Method": row.method,
                    "Δ_MAE (pp)": _fmt(row.delta_mae_pp, 2),
                    "ℓ_max (%)": _fmt(row.max_loading_pct, 1),
                    "Converged": "yes" if row.converged else "NO",
                }
                for row in report.rows
            ]
        )

    def render(
        self,
        report: EvalReport,
        sweeps: Sequence[SweepReport] = (),
        powerflow: Optional[PowerFlowReport] = None,
    ) -> str:
        sections = [
            (
                f"Method matrix (seeds {report.seeds}, "
                f"{'single pass' if report.single_pass else f'{report.n_folds} folds'})",
                self.method_matrix(report),
            ),
            ("Planned comparisons", self.comparison_table(report)),
            ("Marginal effects", self.marginal_table(report)),
            ("Mechanism isolation", self.mechanism_table(report)),
        ]
        sections.extend(
            (f"Sweep over {s.axis} ({s.base} base), RMSE", self.sweep_table(s)) for s in sweeps
        )
        if powerflow is not None:
            sections.append(
                (f"Power flow, region {powerflow.region_id}", self.powerflow_table(powerflow))
            )

        blocks = []
        for title, frame in sections:
            if frame.empty:
                continue
            blocks.append(f"{title}\n{'=' * len(title)}\n{frame.to_string(index=False)}")
        if any(not s.conserving for s in report.methods):
            blocks.append("* does not conserve regional demand")
        return "\n\n".join(blocks) + "\n"
