import math
from collections.abc import Iterable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class DemandSeries(BaseModel):
    """Weekly demand observations X_t, labelled by week."""

    model_config = ConfigDict(frozen=True)

    weeks: list[str] = Field(description="Week labels (integer index or ISO date)")
    values: list[float] = Field(description="Demand per week")
    differencing_applied: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "DemandSeries":
        if len(self.weeks) != len(self.values):
            raise ValueError("weeks and values must have equal length")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("demand values must be finite")
        return self

    @classmethod
    def from_values(cls, values: Iterable[float], start: int = 1) -> "DemandSeries":
        values = [float(v) for v in values]
        weeks = [str(start + i) for i in range(len(values))]
        return cls(weeks=weeks, values=values)

    def __len__(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def window(self, start: int, stop: int) -> "DemandSeries":
        return self.model_copy(
            update={"weeks": self.weeks[start:stop], "values": self.values[start:stop]}
        )


class EventFactor(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(min_length=1)
    levels: tuple[str, ...] = Field(min_length=1)

    @field_validator("levels")
    @classmethod
    def _unique(cls, levels: tuple[str, ...]) -> tuple[str, ...]:
        if len(set(levels)) != len(levels):
            raise ValueError("level identifiers must be unique within a factor")
        return levels


class EventCombination(BaseModel):
    """Factor-name -> level assignment, stored sorted by factor name."""

    model_config = ConfigDict(frozen=True)

    assignment: tuple[tuple[str, str], ...]

    @field_validator("assignment")
    @classmethod
    def _sorted(cls, value: tuple[tuple[str, str], ...]) -> tuple[tuple[str, str], ...]:
        names = [name for name, _ in value]
        if len(set(names)) != len(names):
            raise ValueError("a factor may appear only once in a combination")
        return tuple(sorted(value))

    @classmethod
    def of(cls, mapping: Mapping[str, str]) -> "EventCombination":
        return cls(assignment=tuple(mapping.items()))

    @property
    def levels(self) -> dict[str, str]:
        return dict(self.assignment)

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.assignment)

    def project(self, factor_names: Iterable[str]) -> "EventCombination":
        keep = set(factor_names)
        return EventCombination(
            assignment=tuple(pair for pair in self.assignment if pair[0] in keep)
        )

    def __str__(self) -> str:
        return ", ".join(f"{name}={level}" for name, level in self.assignment)


class EventCalendar(BaseModel):
    """Per-week factor levels; ``None`` marks a week without an event."""

    model_config = ConfigDict(frozen=True)

    weeks: list[str]
    factor_names: tuple[str, ...]
    events: list[dict[str, str] | None]

    @model_validator(mode="after")
    def _check(self) -> "EventCalendar":
        if len(self.weeks) != len(self.events):
            raise ValueError("weeks and events must have equal length")
        expected = set(self.factor_names)
        for week, event in zip(self.weeks, self.events):
            if event is not None and set(event) != expected:
                raise ValueError(f"week {week}: event must assign every factor")
        return self

    @classmethod
    def empty(cls, weeks: Sequence[str], factor_names: Sequence[str] = ()) -> "EventCalendar":
        return cls(
            weeks=list(weeks), factor_names=tuple(factor_names), events=[None] * len(weeks)
        )

    def __len__(self) -> int:
        return len(self.weeks)

    def combination_at(
        self, t: int, factor_names: Iterable[str] | None = None
    ) -> EventCombination | None:
        event = self.events[t]
        if event is None:
            return None
        combination = EventCombination.of(event)
        if factor_names is not None:
            combination = combination.project(factor_names)
        return combination

    def event_weeks(self) -> list[int]:
        return [t for t, event in enumerate(self.events) if event is not None]

    def event_mask(self) -> np.ndarray:
        return np.array([event is not None for event in self.events], dtype=bool)

    def window(self, start: int, stop: int) -> "EventCalendar":
        return self.model_copy(
            update={"weeks": self.weeks[start:stop], "events": self.events[start:stop]}
        )
