"""Reference forecasters: simple exponential smoothing and last-value naive."""
from collections.abc import Sequence

import numpy as np
from scipy import optimize

from fse_forecast.errors import DomainError, InsufficientDataError
from fse_forecast.models.fit import SesFit
from fse_forecast.observability import get_logger

logger = get_logger(__name__)

ALPHA_GRID = np.round(np.arange(1, 101) / 100.0, 2)
ALPHA_MIN = 0.01


def _mask(exclude: Sequence[bool] | np.ndarray | None, n: int) -> np.ndarray:
    if exclude is None:
        return np.zeros(n, dtype=bool)
    mask = np.asarray(exclude, dtype=bool)
    if mask.shape != (n,):
        raise DomainError(f"exclude mask must have {n} entries")
    return mask


def ses_one_step(
    series: Sequence[float] | np.ndarray,
    alpha: float,
    exclude: Sequence[bool] | np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """One-step forecasts l_{t-1} for every week and the final level.

    The level starts at the first observation, so the first forecast equals
    it. Excluded weeks keep the level unchanged.
    """
    x = np.asarray(series, dtype=float)
    mask = _mask(exclude, len(x))
    forecasts = np.empty(len(x))
    level = x[0]
    for t, value in enumerate(x):
        forecasts[t] = level
        if not mask[t]:
            level += alpha * (value - level)
    return forecasts, float(level)


def _sse(x: np.ndarray, alpha: float, mask: np.ndarray) -> float:
    forecasts, _ = ses_one_step(x, alpha, mask)
    errors = (x - forecasts)[1:][~mask[1:]]
    return float(errors @ errors)


def ses_fit(
    series: Sequence[float] | np.ndarray,
    exclude: Sequence[bool] | np.ndarray | None = None,
) -> SesFit:
    """Choose alpha by grid search on in-sample one-step SSE, then refine it."""
    x = np.asarray(series, dtype=float)
    if len(x) < 3:
        raise InsufficientDataError(f"SES needs at least 3 observations, got {len(x)}")
    if not np.all(np.isfinite(x)):
        raise DomainError("series must be finite")
    mask = _mask(exclude, len(x))

    if np.ptp(x) == 0:
        return SesFit(alpha=ALPHA_MIN, level=float(x[0]), sse=0.0, initial_level=float(x[0]))

    grid_sse = np.array([_sse(x, a, mask) for a in ALPHA_GRID])
    best = int(np.argmin(grid_sse))
    alpha, sse = float(ALPHA_GRID[best]), float(grid_sse[best])

    lower = max(ALPHA_MIN, alpha - 0.01)
    upper = min(1.0, alpha + 0.01)
    refined = optimize.minimize_scalar(
        lambda a: _sse(x, a, mask),
        bounds=(lower, upper),
        method="bounded",
        options={"xatol": 1e-6},
    )
    if refined.success and refined.fun < sse:
        alpha, sse = float(refined.x), float(refined.fun)

    _, level = ses_one_step(x, alpha, mask)
    logger.debug("SES fitted", alpha=alpha, sse=sse)
    return SesFit(alpha=alpha, level=level, sse=sse, initial_level=float(x[0]))


def ses_forecast(fit: SesFit, h: int) -> list[float]:
    if h < 1:
        raise DomainError(f"horizon must be at least 1, got {h}")
    return [fit.level] * h


def naive_forecast(series: Sequence[float] | np.ndarray, h: int) -> list[float]:
    if len(series) == 0:
        raise InsufficientDataError("naive forecast of an empty series")
    if h < 1:
        raise DomainError(f"horizon must be at least 1, got {h}")
    return [float(series[-1])] * h


def cleansed_baseline(
    series: Sequence[float] | np.ndarray, event_mask: Sequence[bool] | np.ndarray
) -> list[float]:
    """In-sample one-step SES path fitted and smoothed with event weeks skipped."""
    fit = ses_fit(series, exclude=event_mask)
    forecasts, _ = ses_one_step(series, fit.alpha, event_mask)
    return forecasts.tolist()
