"""Human-readable tables (6 significant digits) and full-precision machine files."""
from collections.abc import Sequence
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from fse_forecast.errors import SchemaError
from fse_forecast.models.fit import FittedModel, FseFit, OrderSelection
from fse_forecast.models.reports import AccuracyReport, CaseReport, ReplicationSummary
from fse_forecast.models.states import DusResult, StateMap
from fse_forecast.observability import get_logger
from fse_forecast.stores.csv_store import atomic_write_text

logger = get_logger(__name__)


def _sig6(value: float) -> str:
    return f"{value:.6g}"


def _table(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, float_format=_sig6, na_rep="-")


def _csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def _write_all(directory: Path, files: dict[str, str]) -> list[Path]:
    written = []
    for name, text in files.items():
        path = directory / name
        atomic_write_text(path, text)
        written.append(path)
    logger.info("Outputs written", directory=str(directory), files=sorted(files))
    return written


def states_frame(state_map: StateMap) -> pd.DataFrame:
    rows = [
        {
            "state": state.label,
            "state_mean_uplift": state.mean_uplift,
            "state_samples": state.sample_count,
            "combination": str(member.combination),
            "combination_mean_uplift": member.mean_uplift,
            "combination_samples": member.count,
        }
        for state in state_map.states
        for member in state.members
    ]
    return pd.DataFrame(rows)


def coefficients_frame(fit: FseFit) -> pd.DataFrame:
    regression = fit.regression
    return pd.DataFrame(
        {
            "term": regression.column_names,
            "estimate": regression.coefficients,
            "std_error": regression.standard_errors,
            "t_statistic": regression.t_statistics,
            "p_value": regression.p_values,
        }
    )


def diagnostics_frame(fit: FseFit) -> pd.DataFrame:
    tests = [fit.diagnostics.kpss, fit.diagnostics.normality, fit.diagnostics.ljung_box]
    return pd.DataFrame(
        [
            {
                "test": test.name,
                "statistic": test.statistic,
                "p_value": test.p_value,
                "reject_at_5pct": test.reject_at_5pct,
            }
            for test in tests
            if test is not None
        ],
        columns=["test", "statistic", "p_value", "reject_at_5pct"],
    )


def aicc_frame(order: OrderSelection) -> pd.DataFrame:
    return pd.DataFrame(
        {"p": list(order.aicc_table), "aicc": list(order.aicc_table.values())}
    )


def accuracy_frame(accuracy: AccuracyReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"forecaster": name, "msae": acc.msae, "mae": acc.mae, "mape": acc.mape}
            for name, acc in accuracy.forecasters.items()
        ]
    )


def improvement_frame(accuracy: AccuracyReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "measure": row.measure,
                accuracy.benchmark: row.benchmark_error,
                accuracy.candidate: row.candidate_error,
                "improvement_pct": row.improvement_pct,
            }
            for row in accuracy.improvement
        ]
    )


def write_dus_result(result: DusResult, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    return _write_all(
        directory,
        {
            "states.csv": _csv(states_frame(result.state_map)),
            "states.json": result.state_map.model_dump_json(indent=2) + "\n",
            "audit.txt": "\n".join(result.audit) + "\n",
        },
    )


def read_state_map(path: str | Path) -> StateMap:
    try:
        return StateMap.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValidationError) as exc:
        raise SchemaError(str(path), None, None, f"not a state map: {exc}") from exc


def write_fitted_model(model: FittedModel, path: str | Path) -> Path:
    path = Path(path)
    atomic_write_text(path, model.model_dump_json(indent=2) + "\n")
    return path


def read_fitted_model(path: str | Path) -> FittedModel:
    try:
        return FittedModel.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValidationError) as exc:
        raise SchemaError(str(path), None, None, f"not a fitted model: {exc}") from exc


def write_forecast(weeks: Sequence[str], values: Sequence[float], path: str | Path) -> Path:
    path = Path(path)
    atomic_write_text(path, _csv(pd.DataFrame({"week": list(weeks), "forecast": list(values)})))
    return path


def render_case_report(report: CaseReport) -> str:
    fit = report.fit
    descriptive = report.descriptive.model_dump()
    sections = [
        f"Training weeks: {report.train_length}   Holdout weeks: {report.holdout_length}",
        "Descriptive statistics\n"
        + _table(pd.DataFrame([{k: v for k, v in descriptive.items() if v is not None}])),
    ]
    if report.kpss_trail:
        sections.append(
            "Stationarity (KPSS)\n"
            + _table(
                pd.DataFrame(
                    [
                        {
                            "differences": i,
                            "statistic": test.statistic,
                            "p_value": test.p_value,
                            "reject_at_5pct": test.reject_at_5pct,
                        }
                        for i, test in enumerate(report.kpss_trail)
                    ]
                )
            )
        )
    if report.state_map is not None:
        sections.append("Demand uplift states\n" + _table(states_frame(report.state_map)))
    sections += [
        f"Order selection: p = {report.order.p}\n" + _table(aicc_frame(report.order)),
        f"Coefficients (p = {fit.p}, m = {fit.m}, sigma = {_sig6(fit.residual_sigma)})\n"
        + _table(coefficients_frame(fit)),
        "Residual diagnostics\n" + _table(diagnostics_frame(fit)),
        f"Accuracy ({report.accuracy.msae_variant} MSAE)\n"
        + _table(accuracy_frame(report.accuracy)),
        "Improvement\n" + _table(improvement_frame(report.accuracy)),
    ]
    if fit.warnings:
        sections.append("Warnings\n" + "\n".join(fit.warnings))
    return "\n\n".join(sections) + "\n"


def write_case_report(report: CaseReport, directory: str | Path) -> list[Path]:
    """The text report plus one CSV per table and per plotted series."""
    series = pd.DataFrame([row.model_dump() for row in report.series])
    forecasts = pd.DataFrame(
        {"week": [row.week for row in report.series], **report.forecasts}
    )
    files = {
        "report.txt": render_case_report(report),
        "report.json": report.model_dump_json(indent=2) + "\n",
        "accuracy.csv": _csv(accuracy_frame(report.accuracy)),
        "improvement.csv": _csv(improvement_frame(report.accuracy)),
        "coefficients.csv": _csv(coefficients_frame(report.fit)),
        "diagnostics.csv": _csv(diagnostics_frame(report.fit)),
        "aicc.csv": _csv(aicc_frame(report.order)),
        "series.csv": _csv(series),
        "forecasts.csv": _csv(forecasts),
    }
    if report.state_map is not None:
        files["states.csv"] = _csv(states_frame(report.state_map))
        files["audit.txt"] = "\n".join(report.dus_audit) + "\n"
    return _write_all(Path(directory), files)


def replication_frame(summary: ReplicationSummary) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"forecaster": name, "measure": measure, **stats.model_dump()}
            for name, by_measure in summary.metrics.items()
            for measure, stats in by_measure.items()
        ],
        columns=["forecaster", "measure", "mean", "q05", "median", "q95"],
    )


def write_replication(summary: ReplicationSummary, directory: str | Path) -> list[Path]:
    frame = replication_frame(summary)
    recovered = sum(outcome.partition_recovered for outcome in summary.outcomes)
    text = (
        f"Shape {summary.shape}: {len(summary.outcomes)} of {len(summary.seeds)} seeds\n"
        f"p chosen: {summary.p_frequency}\n"
        f"states found: {summary.state_count_frequency}\n"
        f"true states recovered: {recovered} of {len(summary.outcomes)}\n\n"
        + _table(frame)
        + "\n"
    )
    return _write_all(
        Path(directory),
        {
            "replicate.json": summary.model_dump_json(indent=2) + "\n",
            "replicate.csv": _csv(frame),
            "replicate.txt": text,
        },
    )
