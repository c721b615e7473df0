"""
Autoregressive regression with demand uplift state indicators.

X_t = a0 + sum_i a_i X_{t-i} + sum_j b_j S_jt + e_t, estimated by OLS on rows
p..n-1 of the (possibly differenced) series.
"""
import math
from collections.abc import Sequence
from typing import Literal

import numpy as np
from scipy import special

from fse_forecast.errors import (
    DeadStateError,
    DegenerateInputError,
    DomainError,
    InsufficientDataError,
    NonStationaryError,
    UnindexedCombinationError,
)
from fse_forecast.models.fit import FseDiagnostics, FseFit, OrderSelection, StateDesign
from fse_forecast.models.series import DemandSeries, EventCalendar
from fse_forecast.models.states import StateMap
from fse_forecast.models.stats import TestResult
from fse_forecast.observability import get_logger
from fse_forecast.services.stats_kernel import (
    default_ljung_box_lags,
    kpss_test,
    ljung_box,
    normality_test,
    ols_fit,
)

logger = get_logger(__name__)

ForecastMode = Literal["recursive", "rolling"]
SeriesLike = DemandSeries | Sequence[float] | np.ndarray


def _values(series: SeriesLike) -> tuple[np.ndarray, int]:
    if isinstance(series, DemandSeries):
        return series.array(), series.differencing_applied
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise DomainError("series must be a finite vector")
    return x, 0


def build_state_design(
    calendar: EventCalendar,
    state_map: StateMap | None,
    start: int = 0,
    stop: int | None = None,
) -> StateDesign:
    """Indicator matrix over calendar weeks start..stop-1."""
    window = calendar.window(start, len(calendar) if stop is None else stop)
    if state_map is None:
        if window.event_weeks():
            raise DomainError("event weeks present but no state map was supplied")
        return StateDesign.empty(window.weeks)

    m = state_map.m
    matrix = [[0] * m for _ in window.weeks]
    for t in window.event_weeks():
        combination = window.combination_at(t, state_map.factor_names)
        assert combination is not None
        label = state_map.state_of(combination)
        if label is None:
            raise UnindexedCombinationError(window.weeks[t], str(combination))
        matrix[t][label - 1] = 1
    return StateDesign(
        weeks=window.weeks, state_labels=list(range(1, m + 1)), matrix=matrix
    )


def _difference(series: DemandSeries) -> DemandSeries:
    values = np.diff(series.array())
    return DemandSeries(
        weeks=series.weeks[1:],
        values=values.tolist(),
        differencing_applied=series.differencing_applied + 1,
    )


def check_stationarity_and_difference(
    series: DemandSeries,
    max_diff: int = 1,
    event_mask: Sequence[bool] | np.ndarray | None = None,
) -> tuple[DemandSeries, list[TestResult]]:
    """KPSS at 5%, differencing at lag 1 until the series passes.

    With ``event_mask`` the test sees only the weeks without events; the
    full series is tested when too few of them remain.
    """
    if max_diff < 0:
        raise DomainError(f"max_diff must be non-negative, got {max_diff}")
    mask = (
        np.zeros(len(series), dtype=bool)
        if event_mask is None
        else np.asarray(event_mask, dtype=bool)
    )
    if mask.shape != (len(series),):
        raise DomainError(f"event mask must have {len(series)} entries")

    trail: list[TestResult] = []
    current = series
    while True:
        x = current.array()
        tested = x[~mask] if np.count_nonzero(~mask) >= 20 else x
        result = kpss_test(tested)
        trail.append(result)
        logger.debug(
            "KPSS tested",
            differences=current.differencing_applied,
            statistic=result.statistic,
            reject=result.reject_at_5pct,
        )
        if not result.reject_at_5pct:
            return current, trail
        if current.differencing_applied - series.differencing_applied >= max_diff:
            raise NonStationaryError(
                f"series still rejects level stationarity after {max_diff} "
                "difference(s); treat it manually"
            )
        current = _difference(current)
        mask = mask[1:] | mask[:-1]


def _check_design(x: np.ndarray, design: StateDesign) -> np.ndarray:
    if len(design) != len(x):
        raise DomainError(f"design has {len(design)} rows for {len(x)} observations")
    return design.array()


def _regressors(x: np.ndarray, S: np.ndarray, p: int, start: int) -> np.ndarray:
    n = len(x)
    columns = [np.ones(n - start)]
    columns += [x[start - i : n - i] for i in range(1, p + 1)]
    columns += [S[start:, j] for j in range(S.shape[1])]
    return np.column_stack(columns)


def _column_names(p: int, labels: Sequence[int]) -> list[str]:
    return ["const"] + [f"ar{i}" for i in range(1, p + 1)] + [f"state{j}" for j in labels]


def _dead_states(S: np.ndarray, labels: Sequence[int], start: int) -> list[int]:
    active = S[start:].sum(axis=0)
    return [label for label, count in zip(labels, active) if count == 0]


def aicc(sse: float, n_eff: int, q: int) -> float:
    if n_eff - q - 1 <= 0:
        return math.inf
    fit_term = -math.inf if sse <= 0 else n_eff * math.log(sse / n_eff)
    return fit_term + 2 * q + 2 * q * (q + 1) / (n_eff - q - 1)


def select_order(
    series: SeriesLike, state_design: StateDesign, p_max: int = 8
) -> OrderSelection:
    """AICc for p = 0..p_max on the common rows p_max..n-1; ties keep the smaller p."""
    x, _ = _values(series)
    S = _check_design(x, state_design)
    m = state_design.m
    n = len(x)
    if p_max < 0:
        raise DomainError(f"p_max must be non-negative, got {p_max}")
    if n <= p_max + m + 3:
        raise InsufficientDataError(
            f"{n} observations are too few for p_max={p_max} with {m} states"
        )
    dead = _dead_states(S, state_design.state_labels, p_max)
    if dead:
        raise DeadStateError(dead)

    y = x[p_max:]
    n_eff = len(y)
    table: dict[int, float] = {}
    for p in range(p_max + 1):
        regression = ols_fit(_regressors(x, S, p, p_max), y)
        table[p] = aicc(regression.sse, n_eff, 1 + p + m + 1)

    best = min(table, key=lambda p: (table[p], p))
    logger.info("Order selected", p=best, aicc=table[best], n_effective=n_eff)
    return OrderSelection(p=best, aicc_table=table, n_effective=n_eff)


def ar_root_moduli(alphas: Sequence[float]) -> list[float]:
    """Moduli of the roots of 1 - a1 z - ... - ap z^p."""
    if not alphas:
        return []
    coefficients = [-a for a in reversed(alphas)] + [1.0]
    while coefficients and coefficients[0] == 0:
        coefficients.pop(0)
    if len(coefficients) < 2:
        return []
    return sorted(float(abs(root)) for root in np.roots(coefficients))


def _diagnose(
    residuals: np.ndarray, p: int, kpss: TestResult | None, warnings: list[str]
) -> FseDiagnostics:
    normality = ljung = None
    try:
        normality = normality_test(residuals)
    except (InsufficientDataError, DegenerateInputError) as exc:
        warnings.append(f"normality test skipped: {exc}")
    lags = default_ljung_box_lags(len(residuals))
    if p < lags:
        try:
            ljung = ljung_box(residuals, lags, fitted_params=p)
        except DegenerateInputError as exc:
            warnings.append(f"Ljung-Box test skipped: {exc}")
    else:
        warnings.append(f"Ljung-Box test skipped: {lags} lags cannot absorb p={p}")
    return FseDiagnostics(kpss=kpss, normality=normality, ljung_box=ljung)


def fit(
    series: SeriesLike,
    state_design: StateDesign,
    p: int,
    kpss: TestResult | None = None,
) -> FseFit:
    x, differenced = _values(series)
    S = _check_design(x, state_design)
    m = state_design.m
    n = len(x)
    if p < 0:
        raise DomainError(f"AR order must be non-negative, got {p}")
    if n - p <= 1 + p + m:
        raise InsufficientDataError(f"{n} observations cannot fit p={p} with {m} states")
    dead = _dead_states(S, state_design.state_labels, p)
    if dead:
        raise DeadStateError(dead)

    names = _column_names(p, state_design.state_labels)
    regression = ols_fit(_regressors(x, S, p, p), x[p:], names)
    coef = regression.coefficients
    alphas, betas = coef[1 : 1 + p], coef[1 + p :]

    warnings: list[str] = []
    moduli = ar_root_moduli(alphas)
    if any(r <= 1.0 for r in moduli):
        warnings.append(f"fitted AR polynomial has a root on or inside the unit circle: {moduli}")
        logger.warning("Fitted AR polynomial not stationary", root_moduli=moduli)

    if kpss is None and n >= 20:
        kpss = kpss_test(x)
    residuals = np.asarray(regression.residuals)
    diagnostics = _diagnose(residuals, p, kpss, warnings)

    n_eff = n - p
    return FseFit(
        p=p,
        m=m,
        alpha0=coef[0],
        alphas=alphas,
        betas=betas,
        residual_sigma=math.sqrt(regression.sse / regression.df_resid),
        regression=regression,
        aicc=aicc(regression.sse, n_eff, 1 + p + m + 1),
        diagnostics=diagnostics,
        differencing_applied=differenced,
        state_labels=list(state_design.state_labels),
        ar_root_moduli=moduli,
        warnings=warnings,
    )


def fit_ar(series: SeriesLike, p: int) -> FseFit:
    """Plain AR(p): the model with no state terms."""
    x, _ = _values(series)
    weeks = series.weeks if isinstance(series, DemandSeries) else [str(i) for i in range(len(x))]
    return fit(series, StateDesign.empty(weeks), p)


def forecast(
    fit: FseFit,
    last_observations: Sequence[float] | np.ndarray,
    future_design: StateDesign,
    mode: ForecastMode = "recursive",
    actuals: Sequence[float] | np.ndarray | None = None,
) -> list[float]:
    """Forecast every row of ``future_design``.

    ``last_observations`` and ``actuals`` are on the original scale; with d
    differences applied at least p + d observations are required, and
    forecasts are integrated back before they are returned.
    """
    h = len(future_design)
    if h <= 0:
        raise DomainError("forecast horizon must be positive")
    if future_design.m != fit.m:
        raise DomainError(f"future design has {future_design.m} states, fit has {fit.m}")
    d = fit.differencing_applied
    history = [float(v) for v in last_observations]
    if len(history) < fit.p + d:
        raise InsufficientDataError(
            f"need {fit.p + d} last observations, got {len(history)}"
        )
    if mode == "rolling":
        if actuals is None or len(actuals) != h:
            raise DomainError(f"rolling forecasts need {h} actuals")
    elif mode != "recursive":
        raise DomainError(f"unknown forecast mode '{mode}'")

    alphas = np.asarray(fit.alphas)
    betas = np.asarray(fit.betas)
    S = future_design.array()
    undo = [float(special.comb(d, k, exact=True)) * (-1) ** k for k in range(1, d + 1)]

    forecasts: list[float] = []
    for step in range(h):
        z = np.diff(np.asarray(history[-(fit.p + d) :] if fit.p + d else []), n=d)
        value = fit.alpha0 + float(alphas @ z[::-1][: fit.p]) + float(betas @ S[step])
        value -= sum(c * history[-k] for k, c in enumerate(undo, start=1))
        forecasts.append(value)
        history.append(float(actuals[step]) if mode == "rolling" else value)  # type: ignore[index]
    return forecasts


class FseModelService:
    """Stationarity, order selection, estimation and forecasting with fixed settings."""

    def __init__(
        self,
        p_max: int = 8,
        max_diff: int = 1,
        forecast_mode: ForecastMode = "recursive",
    ):
        self.p_max = p_max
        self.max_diff = max_diff
        self.forecast_mode = forecast_mode

    def stationarity(
        self, series: DemandSeries, event_mask: np.ndarray | None = None
    ) -> tuple[DemandSeries, list[TestResult]]:
        return check_stationarity_and_difference(series, self.max_diff, event_mask)

    def select_order(self, series: SeriesLike, design: StateDesign) -> OrderSelection:
        return select_order(series, design, self.p_max)

    def fit(
        self, series: SeriesLike, design: StateDesign, p: int, kpss: TestResult | None = None
    ) -> FseFit:
        return fit(series, design, p, kpss)

    def forecast(
        self,
        fitted: FseFit,
        last_observations: Sequence[float] | np.ndarray,
        future_design: StateDesign,
        actuals: Sequence[float] | np.ndarray | None = None,
    ) -> list[float]:
        return forecast(fitted, last_observations, future_design, self.forecast_mode, actuals)
