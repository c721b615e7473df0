from typing import ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats


class RegressionFit(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    coefficients: list[float] = Field(description="Least-squares estimates")
    standard_errors: list[float] = Field(description="Homoskedastic standard errors")
    t_statistics: list[float] = Field(description="Coefficient / standard error")
    p_values: list[float] = Field(description="Two-sided t-test p-values")
    residuals: list[float] = Field(description="Response minus fitted values")
    fitted_values: list[float] = Field(description="Design times coefficients")
    sse: float = Field(ge=0.0, description="Sum of squared residuals")
    n_obs: int = Field(gt=0)
    n_params: int = Field(gt=0)
    column_names: list[str] | None = None

    @model_validator(mode="after")
    def _check_lengths(self) -> "RegressionFit":
        k = self.n_params
        for name in ("coefficients", "standard_errors", "t_statistics", "p_values"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} must have n_params={k} entries")
        if len(self.residuals) != self.n_obs or len(self.fitted_values) != self.n_obs:
            raise ValueError("residuals and fitted values must have n_obs entries")
        return self

    @property
    def df_resid(self) -> int:
        return self.n_obs - self.n_params

    def coefficient(self, name: str) -> float:
        if self.column_names is None:
            raise KeyError(name)
        return self.coefficients[self.column_names.index(name)]

    def confidence_intervals(self, level: float = 0.95) -> list[tuple[float, float]]:
        """Symmetric t-quantile intervals for every coefficient."""
        quantile = float(stats.t.ppf(0.5 + level / 2.0, self.df_resid))
        coef = np.asarray(self.coefficients)
        half = quantile * np.asarray(self.standard_errors)
        return [(float(lo), float(hi)) for lo, hi in zip(coef - half, coef + half)]


class TestResult(BaseModel):
    """Outcome of a hypothesis test; ``p_value`` is approximate for KPSS."""

    __test__: ClassVar[bool] = False

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    name: str
    statistic: float
    p_value: float | None = Field(default=None, ge=0.0, le=1.0)
    reject_at_5pct: bool
    meta: dict[str, float | int | bool | str] = Field(default_factory=dict)


class FactorEffect(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    factor: str
    f_statistic: float
    p_value: float = Field(ge=0.0, le=1.0)
    df_num: int
    df_den: int
