"""
Statistical primitives shared by every stage.

OLS with inference, upper-tail probabilities from the regularized incomplete
gamma/beta functions, and the KPSS, Ljung-Box, Jarque-Bera, ANOVA and Welch
tests. Every function is pure.
"""
import math
from collections.abc import Mapping, Sequence
from typing import Literal

import numpy as np
from scipy import linalg, special, stats

from fse_forecast.errors import (
    DegenerateInputError,
    DomainError,
    InsufficientDataError,
    NoTestableFactorError,
    RankDeficientError,
)
from fse_forecast.models.stats import FactorEffect, RegressionFit, TestResult
from fse_forecast.observability import get_logger

logger = get_logger(__name__)

P_VALUE_FLOOR = 1e-300

# Level-stationarity critical values, ascending statistic / descending size
KPSS_CRITICAL = np.array([0.347, 0.463, 0.574, 0.739])
KPSS_SIZES = np.array([0.10, 0.05, 0.025, 0.01])
KPSS_CRITICAL_5PCT = 0.463

Distribution = Literal["normal", "student_t", "chi_squared", "f"]


def cap_p_value(p: float) -> float:
    return float(min(1.0, max(P_VALUE_FLOOR, p)))


def _as_vector(values: Sequence[float] | np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{what} must be finite")
    return x


def tail_probability(distribution: Distribution, statistic: float, *df: float) -> float:
    """Upper-tail probability P(X > statistic), capped to [1e-300, 1]."""
    if any(not d > 0 for d in df):
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    x = float(statistic)
    if math.isnan(x):
        raise DomainError("statistic is NaN")

    def expect(count: int) -> tuple[float, ...]:
        if len(df) != count:
            raise DomainError(f"{distribution} takes {count} df parameter(s)")
        return tuple(float(d) for d in df)

    match distribution:
        case "normal":
            expect(0)
            p = special.ndtr(-x)
        case "student_t":
            (nu,) = expect(1)
            if math.isinf(x):
                p = 0.0 if x > 0 else 1.0
            else:
                tail = 0.5 * special.betainc(nu / 2.0, 0.5, nu / (nu + x * x))
                p = tail if x >= 0 else 1.0 - tail
        case "chi_squared":
            (k,) = expect(1)
            p = 1.0 if x <= 0 else special.gammaincc(k / 2.0, x / 2.0)
        case "f":
            d1, d2 = expect(2)
            p = 1.0 if x <= 0 else special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))
        case _:
            raise DomainError(f"unknown distribution '{distribution}'")
    return cap_p_value(float(p))


def ols_fit(
    design: Sequence[Sequence[float]] | np.ndarray,
    response: Sequence[float] | np.ndarray,
    column_names: Sequence[str] | None = None,
) -> RegressionFit:
    """Least squares through a column-pivoted QR decomposition."""
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = _as_vector(response, "response")
    n, k = X.shape
    if k < 1 or len(y) != n:
        raise DomainError(f"design is {n}x{k} but response has {len(y)} entries")
    if not np.all(np.isfinite(X)):
        raise DomainError("design must be finite")
    if n <= k:
        raise InsufficientDataError(f"{n} observations cannot estimate {k} parameters")

    names = list(column_names) if column_names is not None else [f"x{j}" for j in range(k)]
    q, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag[0] * max(n, k) * np.finfo(float).eps
    rank = int(np.sum(diag > tol)) if diag[0] > 0 else 0
    if rank < k:
        raise RankDeficientError([names[j] for j in sorted(piv[rank:])])

    beta_p = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_p
    fitted = X @ beta
    residuals = y - fitted
    sse = float(residuals @ residuals)
    df_resid = n - k

    r_inv = linalg.solve_triangular(r, np.eye(k))
    cov = np.empty((k, k))
    cov[np.ix_(piv, piv)] = (sse / df_resid) * (r_inv @ r_inv.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    t_stats = np.zeros(k)
    positive = se > 0
    t_stats[positive] = beta[positive] / se[positive]
    degenerate = ~positive & (beta != 0)
    t_stats[degenerate] = np.copysign(np.inf, beta[degenerate])
    p_values = [
        cap_p_value(2.0 * tail_probability("student_t", abs(t), df_resid)) for t in t_stats
    ]

    return RegressionFit(
        coefficients=beta.tolist(),
        standard_errors=se.tolist(),
        t_statistics=t_stats.tolist(),
        p_values=p_values,
        residuals=residuals.tolist(),
        fitted_values=fitted.tolist(),
        sse=sse,
        n_obs=n,
        n_params=k,
        column_names=names,
    )


def default_kpss_lags(n: int) -> int:
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


def kpss_test(
    series: Sequence[float] | np.ndarray, lag_truncation: int | None = None
) -> TestResult:
    """KPSS level-stationarity test with a Bartlett long-run variance."""
    x = _as_vector(series, "series")
    n = len(x)
    if n < 20:
        raise InsufficientDataError(f"KPSS needs at least 20 observations, got {n}")
    lags = default_kpss_lags(n) if lag_truncation is None else int(lag_truncation)
    if not 0 <= lags < n:
        raise DomainError(f"lag truncation {lags} outside [0, {n})")

    meta: dict[str, float | int | bool | str] = {
        "lags": lags,
        "n": n,
        "p_value_interpolated": True,
    }
    if np.ptp(x) == 0:
        return TestResult(
            name="kpss",
            statistic=0.0,
            p_value=float(KPSS_SIZES[0]),
            reject_at_5pct=False,
            meta={**meta, "degenerate": True},
        )

    e = x - x.mean()
    partial = np.cumsum(e)
    long_run = float(e @ e) / n
    for h in range(1, lags + 1):
        long_run += 2.0 * (1.0 - h / (lags + 1.0)) * float(e[h:] @ e[:-h]) / n
    statistic = float(partial @ partial) / (n**2 * long_run)
    p_value = float(np.interp(statistic, KPSS_CRITICAL, KPSS_SIZES))

    return TestResult(
        name="kpss",
        statistic=statistic,
        p_value=p_value,
        reject_at_5pct=statistic > KPSS_CRITICAL_5PCT,
        meta={**meta, "degenerate": False},
    )


def default_ljung_box_lags(n: int) -> int:
    return min(10, n // 5)


def ljung_box(
    residuals: Sequence[float] | np.ndarray,
    max_lag: int | None = None,
    fitted_params: int = 0,
) -> TestResult:
    e = _as_vector(residuals, "residuals")
    n = len(e)
    lags = default_ljung_box_lags(n) if max_lag is None else int(max_lag)
    if not 1 <= lags < n:
        raise DomainError(f"max_lag {lags} must lie in [1, {n})")
    if not 0 <= fitted_params < lags:
        raise DomainError(f"fitted_params {fitted_params} must be below max_lag {lags}")

    d = e - e.mean()
    denom = float(d @ d)
    if np.ptp(e) == 0 or denom == 0:
        raise DegenerateInputError("Ljung-Box on zero-variance residuals")

    ks = np.arange(1, lags + 1)
    rho = np.array([float(d[k:] @ d[:-k]) / denom for k in ks])
    q = float(n * (n + 2) * np.sum(rho**2 / (n - ks)))
    df = lags - fitted_params
    p_value = tail_probability("chi_squared", q, df)
    return TestResult(
        name="ljung_box",
        statistic=q,
        p_value=p_value,
        reject_at_5pct=p_value < 0.05,
        meta={"lags": lags, "df": df, "fitted_params": fitted_params},
    )


def normality_test(residuals: Sequence[float] | np.ndarray) -> TestResult:
    """Jarque-Bera test on sample skewness and excess kurtosis."""
    x = _as_vector(residuals, "residuals")
    n = len(x)
    if n < 8:
        raise InsufficientDataError(f"normality test needs at least 8 values, got {n}")
    if np.ptp(x) == 0:
        raise DegenerateInputError("normality test on zero-variance input")

    skew = float(stats.skew(x, bias=True))
    excess = float(stats.kurtosis(x, fisher=True, bias=True))
    jb = n / 6.0 * (skew**2 + excess**2 / 4.0)
    p_value = tail_probability("chi_squared", jb, 2)
    return TestResult(
        name="jarque_bera",
        statistic=jb,
        p_value=p_value,
        reject_at_5pct=p_value < 0.05,
        meta={"skewness": skew, "excess_kurtosis": excess, "df": 2},
    )


def _treatment_columns(labels: Sequence[str], levels: Sequence[str]) -> list[np.ndarray]:
    labels_arr = np.asarray(labels, dtype=object)
    return [(labels_arr == level).astype(float) for level in levels[1:]]


def _residual_ss(columns: list[np.ndarray], y: np.ndarray) -> tuple[float, int]:
    X = np.column_stack(columns)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return float(resid @ resid), int(rank)


def anova_factor_screen(
    responses: Sequence[float] | np.ndarray,
    factor_assignments: Mapping[str, Sequence[str]],
) -> dict[str, FactorEffect]:
    """Main-effect F tests, each factor against all other factors' main effects."""
    y = _as_vector(responses, "responses")
    n = len(y)
    if n == 0 or not factor_assignments:
        raise InsufficientDataError("ANOVA needs responses and at least one factor")

    testable: dict[str, list[np.ndarray]] = {}
    for name, labels in factor_assignments.items():
        if len(labels) != n:
            raise DomainError(f"factor '{name}' has {len(labels)} labels for {n} responses")
        levels = list(dict.fromkeys(labels))
        if len(levels) < 2:
            logger.warning("Factor excluded from ANOVA", factor=name, levels=levels)
            continue
        testable[name] = _treatment_columns(labels, levels)
    if not testable:
        raise NoTestableFactorError("no factor has two or more observed levels")

    intercept = np.ones(n)
    full_columns = [intercept] + [col for cols in testable.values() for col in cols]
    sse_full, rank_full = _residual_ss(full_columns, y)
    df_den = n - rank_full
    if df_den <= 0:
        raise InsufficientDataError(
            f"{n} observations cannot test {rank_full} fitted cells"
        )

    effects: dict[str, FactorEffect] = {}
    constant = np.ptp(y) == 0
    negligible = 1e-12 * float(np.sum((y - y.mean()) ** 2))
    for name in testable:
        reduced = [intercept] + [
            col for other, cols in testable.items() if other != name for col in cols
        ]
        sse_reduced, rank_reduced = _residual_ss(reduced, y)
        df_num = rank_full - rank_reduced
        if df_num == 0:
            logger.warning("Factor confounded with other factors", factor=name)
            continue

        between = max(sse_reduced - sse_full, 0.0)
        within = sse_full
        if constant or between <= negligible:
            f_stat, p_value = 0.0, 1.0
        elif within <= negligible:
            f_stat, p_value = math.inf, P_VALUE_FLOOR
        else:
            f_stat = (between / df_num) / (within / df_den)
            p_value = tail_probability("f", f_stat, df_num, df_den)
        effects[name] = FactorEffect(
            factor=name, f_statistic=f_stat, p_value=p_value, df_num=df_num, df_den=df_den
        )
    return effects


def welch_t_test(
    group_a: Sequence[float] | np.ndarray, group_b: Sequence[float] | np.ndarray
) -> TestResult:
    a = _as_vector(group_a, "group_a")
    b = _as_vector(group_b, "group_b")
    if len(a) < 2 or len(b) < 2:
        raise InsufficientDataError("Welch test needs two observations per group")

    na, nb = len(a), len(b)
    diff = float(a.mean() - b.mean())
    sa = float(a.var(ddof=1)) / na
    sb = float(b.var(ddof=1)) / nb

    if sa + sb == 0:
        statistic = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        p_value = 1.0 if diff == 0 else P_VALUE_FLOOR
        df = float(na + nb - 2)
    else:
        statistic = diff / math.sqrt(sa + sb)
        df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
        p_value = cap_p_value(2.0 * tail_probability("student_t", abs(statistic), df))

    return TestResult(
        name="welch_t",
        statistic=statistic,
        p_value=p_value,
        reject_at_5pct=p_value < 0.05,
        meta={"df": df, "n_a": na, "n_b": nb},
    )
