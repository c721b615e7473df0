from pydantic import BaseModel, ConfigDict, Field, model_validator

from fse_forecast.models.series import DemandSeries, EventCalendar, EventCombination
from fse_forecast.models.states import StateMap


class CalendarEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    week: int = Field(ge=0, description="Zero-based week position")
    combination: EventCombination


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_weeks: int = Field(gt=0)
    p: int = Field(ge=0)
    alpha0: float
    alphas: list[float]
    betas: list[float]
    sigma: float = Field(ge=0.0, description="Noise standard deviation")
    calendar_pattern: list[CalendarEvent] = Field(default_factory=list)
    state_map: StateMap | None = None
    factor_levels: dict[str, list[str]] = Field(default_factory=dict)
    seed: int = 0
    burn_in: int = Field(default=200, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "GeneratorSpec":
        if len(self.alphas) != self.p:
            raise ValueError("alphas must have p entries")
        m = self.state_map.m if self.state_map is not None else 0
        if len(self.betas) != m:
            raise ValueError(f"betas must have one entry per state (m={m})")
        weeks = [event.week for event in self.calendar_pattern]
        if len(set(weeks)) != len(weeks):
            raise ValueError("at most one event per week")
        if weeks and max(weeks) >= self.n_weeks:
            raise ValueError("calendar event beyond the generated horizon")
        return self

    @property
    def m(self) -> int:
        return len(self.betas)


class SyntheticBundle(BaseModel):
    model_config = ConfigDict(frozen=True)

    demand: DemandSeries
    calendar: EventCalendar
    truth: GeneratorSpec
    baseline: list[float] = Field(description="SES one-step path over demand, event weeks skipped")
    counterfactual: list[float] = Field(description="Same noise, no events")
