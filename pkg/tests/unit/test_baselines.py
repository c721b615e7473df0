import numpy as np
import pytest

from fse_forecast.errors import DomainError, InsufficientDataError
from fse_forecast.services.baselines import (
    ALPHA_MIN,
    cleansed_baseline,
    naive_forecast,
    ses_fit,
    ses_forecast,
    ses_one_step,
)


def _ar1(rng, n: int = 60, phi: float = 0.6) -> np.ndarray:
    x = np.zeros(n)
    noise = rng.normal(size=n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + noise[t]
    return 50.0 + x


def test_one_step_recursion():
    forecasts, level = ses_one_step([10.0, 20.0, 30.0], 0.5)

    assert forecasts.tolist() == [10.0, 10.0, 15.0]
    assert level == 22.5


def test_one_step_skips_excluded_weeks():
    forecasts, level = ses_one_step([10.0, 20.0, 30.0], 0.5, exclude=[False, True, False])

    assert forecasts.tolist() == [10.0, 10.0, 10.0]
    assert level == 20.0


def test_alpha_one_is_naive():
    x = [3.0, 8.0, 1.0, 4.0]

    forecasts, _ = ses_one_step(x, 1.0)

    assert forecasts[1:].tolist() == x[:-1]
    assert naive_forecast(x, 1) == [x[-1]]


def test_constant_series():
    fit = ses_fit([7.0] * 10)

    assert fit.alpha == ALPHA_MIN
    assert fit.level == 7.0
    assert fit.sse == 0.0
    assert ses_forecast(fit, 4) == [7.0] * 4


def test_level_shift_prefers_alpha_one():
    fit = ses_fit([0.0] * 10 + [100.0] * 10)

    assert fit.alpha == pytest.approx(1.0, abs=1e-3)
    assert fit.level == pytest.approx(100.0, abs=1e-3)


def test_fit_matches_fine_grid_oracle(rng):
    x = _ar1(rng)

    fit = ses_fit(x)

    def sse(alpha):
        forecasts, _ = ses_one_step(x, alpha)
        return float(np.sum((x[1:] - forecasts[1:]) ** 2))

    grid = np.arange(1, 10001) / 10000.0
    values = np.array([sse(a) for a in grid])

    assert fit.sse <= values.min() * (1 + 1e-6)
    assert fit.sse == pytest.approx(sse(fit.alpha), rel=1e-12)
    assert fit.sse <= sse(1.0)


def test_smoothed_path_stays_within_range(rng):
    x = _ar1(rng)
    fit = ses_fit(x)

    forecasts, level = ses_one_step(x, fit.alpha)

    assert forecasts.min() >= x.min()
    assert forecasts.max() <= x.max()
    assert x.min() <= level <= x.max()


def test_one_step_forecast_matches_flat_forecast(rng):
    x = _ar1(rng)
    fit = ses_fit(x)

    _, level = ses_one_step(x, fit.alpha)

    assert ses_forecast(fit, 1) == [pytest.approx(level)]


def test_excluded_weeks_do_not_enter_fit():
    x = [50.0] * 12
    x[5] = 900.0
    mask = [t == 5 for t in range(12)]

    fit = ses_fit(x, exclude=mask)

    assert fit.sse == 0.0
    assert fit.level == 50.0


def test_cleansed_baseline_holds_level_through_events():
    x = [100.0, 104.0, 98.0, 101.0, 99.0, 600.0, 102.0, 97.0, 103.0, 100.0]
    mask = [t == 5 for t in range(10)]

    baseline = cleansed_baseline(x, mask)

    assert len(baseline) == 10
    assert baseline[6] == baseline[5]
    assert max(baseline) < 200.0


def test_validation_errors():
    with pytest.raises(InsufficientDataError):
        ses_fit([1.0, 2.0])
    with pytest.raises(DomainError):
        ses_forecast(ses_fit([1.0, 2.0, 3.0]), 0)
    with pytest.raises(InsufficientDataError):
        naive_forecast([], 2)
    with pytest.raises(DomainError):
        ses_one_step([1.0, 2.0, 3.0], 0.5, exclude=[True])


def test_naive_repeats_last_value():
    assert naive_forecast([1.0, 2.0, 3.0], 2) == [3.0, 3.0]
