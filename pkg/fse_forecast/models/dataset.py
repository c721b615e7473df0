from pydantic import BaseModel, ConfigDict, model_validator

from fse_forecast.models.series import DemandSeries, EventCalendar, EventFactor


class DatasetBundle(BaseModel):
    """Everything one case needs: demand, events, optional forecast columns."""

    model_config = ConfigDict(frozen=True)

    demand: DemandSeries
    calendar: EventCalendar
    factor_declarations: list[EventFactor]
    baseline_forecasts: list[float] | None = None
    adjusted_forecasts: list[float] | None = None

    @model_validator(mode="after")
    def _check(self) -> "DatasetBundle":
        n = len(self.demand)
        if self.calendar.weeks != self.demand.weeks:
            raise ValueError("calendar and demand must share one weekly index")
        for name in ("baseline_forecasts", "adjusted_forecasts"):
            column = getattr(self, name)
            if column is not None and len(column) != n:
                raise ValueError(f"{name} must cover all {n} weeks")

        declared = {factor.name: set(factor.levels) for factor in self.factor_declarations}
        for week, event in zip(self.calendar.weeks, self.calendar.events):
            if event is None:
                continue
            for factor, level in event.items():
                if level not in declared.get(factor, set()):
                    raise ValueError(f"week {week}: undeclared level {factor}={level}")
        return self

    @property
    def factor_map(self) -> dict[str, EventFactor]:
        return {factor.name: factor for factor in self.factor_declarations}
