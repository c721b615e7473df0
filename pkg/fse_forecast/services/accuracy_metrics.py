"""Forecast error measures and the improvement statistic."""
from collections.abc import Mapping, Sequence
from decimal import ROUND_HALF_UP, Decimal
from typing import Literal

import numpy as np

from fse_forecast.errors import DomainError, InsufficientDataError
from fse_forecast.models.reports import (
    AccuracyReport,
    ErrorMeasure,
    ForecasterAccuracy,
    ImprovementRow,
)

MsaeVariant = Literal["ratio_of_sums", "paper_literal"]
ZeroPolicy = Literal["exclude", "error"]

MEASURES: tuple[ErrorMeasure, ...] = ("msae", "mae", "mape")


def _pair(
    forecasts: Sequence[float] | np.ndarray, actuals: Sequence[float] | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(forecasts, dtype=float)
    x = np.asarray(actuals, dtype=float)
    if f.shape != x.shape or f.ndim != 1:
        raise DomainError(
            f"forecasts and actuals must be equal-length vectors, got {f.shape} and {x.shape}"
        )
    if f.size == 0:
        raise InsufficientDataError("no periods to score")
    return f, x


def mae(forecasts, actuals) -> float:
    f, x = _pair(forecasts, actuals)
    return float(np.mean(np.abs(f - x)))


def mape(forecasts, actuals, zero_policy: ZeroPolicy = "exclude") -> float:
    """Mean absolute percentage error, in percent of |x_t|."""
    f, x = _pair(forecasts, actuals)
    nonzero = x != 0
    if not nonzero.any():
        raise DomainError("MAPE is undefined when every actual is zero")
    if zero_policy == "error" and not nonzero.all():
        raise DomainError(f"zero actual(s) at position(s) {np.flatnonzero(~nonzero).tolist()}")
    if zero_policy not in ("exclude", "error"):
        raise DomainError(f"unknown zero policy '{zero_policy}'")
    f, x = f[nonzero], x[nonzero]
    return float(100.0 * np.mean(np.abs(f - x) / np.abs(x)))


def msae(forecasts, actuals, variant: MsaeVariant = "ratio_of_sums") -> float:
    """Absolute errors scaled by total demand over the window.

    ``ratio_of_sums`` is sum|e| / sum x; ``paper_literal`` additionally divides
    by the number of periods.
    """
    f, x = _pair(forecasts, actuals)
    total = float(np.sum(x))
    if total <= 0:
        raise DomainError(f"total demand must be positive, got {total}")
    absolute = float(np.sum(np.abs(f - x)))
    match variant:
        case "ratio_of_sums":
            return absolute / total
        case "paper_literal":
            return absolute / total / len(x)
        case _:
            raise DomainError(f"unknown MSAE variant '{variant}'")


def ae_re_series(forecasts, actuals) -> tuple[list[float], list[float | None]]:
    f, x = _pair(forecasts, actuals)
    ae = np.abs(f - x).tolist()
    re = [None if xt == 0 else float((ft - xt) / xt) for ft, xt in zip(f, x)]
    return ae, re


def improvement(benchmark_error: float, candidate_error: float) -> int:
    """Percent reduction of the candidate error, rounded half away from zero."""
    if not benchmark_error > 0:
        raise DomainError(f"benchmark error must be positive, got {benchmark_error}")
    pct = 100.0 * (benchmark_error - candidate_error) / benchmark_error
    return int(Decimal(repr(pct)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def score_forecaster(
    forecasts,
    actuals,
    msae_variant: MsaeVariant = "ratio_of_sums",
    zero_policy: ZeroPolicy = "exclude",
) -> ForecasterAccuracy:
    ae, re = ae_re_series(forecasts, actuals)
    return ForecasterAccuracy(
        mae=mae(forecasts, actuals),
        mape=mape(forecasts, actuals, zero_policy),
        msae=msae(forecasts, actuals, msae_variant),
        ae_series=ae,
        re_series=re,
    )


def build_accuracy_report(
    forecasts: Mapping[str, Sequence[float]],
    actuals: Sequence[float],
    benchmark: str,
    candidate: str,
    msae_variant: MsaeVariant = "ratio_of_sums",
    zero_policy: ZeroPolicy = "exclude",
) -> AccuracyReport:
    """Score every forecaster and compare ``candidate`` against ``benchmark``."""
    scored = {
        name: score_forecaster(values, actuals, msae_variant, zero_policy)
        for name, values in forecasts.items()
    }
    for name in (benchmark, candidate):
        if name not in scored:
            raise DomainError(f"forecaster '{name}' was not supplied")

    rows = []
    for measure in MEASURES:
        bench = scored[benchmark].error(measure)
        cand = scored[candidate].error(measure)
        rows.append(
            ImprovementRow(
                measure=measure,
                benchmark_error=bench,
                candidate_error=cand,
                improvement_pct=improvement(bench, cand),
            )
        )
    return AccuracyReport(
        forecasters=scored,
        benchmark=benchmark,
        candidate=candidate,
        msae_variant=msae_variant,
        improvement=rows,
    )
