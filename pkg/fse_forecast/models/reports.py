from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from fse_forecast.models.fit import FseFit, OrderSelection
from fse_forecast.models.states import FactorEvidence, StateMap
from fse_forecast.models.stats import TestResult

ErrorMeasure = Literal["msae", "mae", "mape"]


class ForecasterAccuracy(BaseModel):
    model_config = ConfigDict(frozen=True)

    mae: float = Field(ge=0.0)
    mape: float
    msae: float = Field(ge=0.0)
    ae_series: list[float]
    re_series: list[float | None] = Field(description="None where the actual is 0")

    def error(self, measure: ErrorMeasure) -> float:
        return getattr(self, measure)


class ImprovementRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    measure: ErrorMeasure
    benchmark_error: float
    candidate_error: float
    improvement_pct: int


class AccuracyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    forecasters: dict[str, ForecasterAccuracy]
    benchmark: str
    candidate: str
    msae_variant: str
    improvement: list[ImprovementRow]

    @model_validator(mode="after")
    def _check(self) -> "AccuracyReport":
        for name in (self.benchmark, self.candidate):
            if name not in self.forecasters:
                raise ValueError(f"forecaster '{name}' missing from the report")
        return self


class SeriesRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    week: str
    actual: float
    event: bool
    fse_forecast: float
    benchmark_forecast: float
    fse_ae: float
    fse_re: float | None
    benchmark_ae: float
    benchmark_re: float | None


class DescriptiveStats(BaseModel):
    """Promotional vs non-promotional summary of a whole series."""

    model_config = ConfigDict(frozen=True)

    n_weeks: int
    n_event_weeks: int
    mean_demand_event: float | None
    mean_demand_non_event: float | None
    reference: str | None = Field(
        default=None, description="Forecast column the error rows are computed from"
    )
    mae_event: float | None = None
    mae_non_event: float | None = None
    mape_event: float | None = None
    mape_non_event: float | None = None


class CaseReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    train_length: int
    holdout_length: int
    descriptive: DescriptiveStats
    kpss_trail: list[TestResult]
    factor_evidence: list[FactorEvidence]
    state_map: StateMap | None = Field(description="None when training has no events")
    dus_audit: list[str]
    order: OrderSelection
    fit: FseFit
    forecasts: dict[str, list[float]]
    accuracy: AccuracyReport
    series: list[SeriesRow]


class MetricSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    q05: float
    median: float
    q95: float


class SeedOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    p: int
    m: int
    metrics: dict[str, dict[str, float]]
    partition_recovered: bool = Field(
        default=False, description="Fitted states group the combinations exactly as the truth"
    )
    coverage: list[bool] = Field(
        default_factory=list,
        description=(
            "True alpha0, alphas and betas inside their 95% intervals; empty unless the"
            " order and the states match the truth"
        ),
    )


class ReplicationSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    shape: str
    seeds: list[int]
    failed_seeds: dict[int, str]
    outcomes: list[SeedOutcome]
    metrics: dict[str, dict[str, MetricSummary]]
    p_frequency: dict[int, int]
    state_count_frequency: dict[int, int]
