from pydantic import BaseModel, ConfigDict, Field, model_validator

from fse_forecast.models.series import EventCombination, EventFactor
from fse_forecast.models.stats import FactorEffect


class UpliftSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    week_index: int = Field(ge=0, description="Position of the event week")
    week: str
    combination: EventCombination
    uplift: float = Field(description="Actual minus baseline, demand units")


class FactorEvidence(BaseModel):
    model_config = ConfigDict(frozen=True)

    factor: EventFactor
    effect: FactorEffect
    significant: bool


class LabeledCombination(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: int = Field(ge=1)
    combination: EventCombination


class CombinationStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    combination: EventCombination
    mean: float
    count: int = Field(ge=1)
    variance: float | None = Field(
        default=None, description="Sample variance; unavailable for a single sample"
    )
    samples: list[float] = Field(default_factory=list)


class MergePolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    test_alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    fallback_rel_tol: float = Field(default=0.15, ge=0.0)


class MergeDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    first: EventCombination
    second: EventCombination
    rule: str = Field(description="'welch' or 'relative_tolerance'")
    value: float = Field(description="Welch p-value or relative mean difference")
    merged: bool


class StateMember(BaseModel):
    model_config = ConfigDict(frozen=True)

    combination: EventCombination
    mean_uplift: float | None = None
    count: int = Field(default=0, ge=0)


class UpliftState(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: int = Field(ge=1)
    members: tuple[StateMember, ...] = Field(min_length=1)
    mean_uplift: float | None = None
    sample_count: int = Field(default=0, ge=0)


class StateMap(BaseModel):
    """Demand uplift states labelled 1..m and the combinations they hold."""

    model_config = ConfigDict(frozen=True)

    factor_names: tuple[str, ...]
    states: tuple[UpliftState, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check(self) -> "StateMap":
        labels = [state.label for state in self.states]
        if labels != list(range(1, len(labels) + 1)):
            raise ValueError(f"state labels must be 1..m without gaps, got {labels}")
        seen: set[EventCombination] = set()
        for state in self.states:
            for member in state.members:
                if member.combination in seen:
                    raise ValueError(
                        f"combination {member.combination} belongs to two states"
                    )
                seen.add(member.combination)
        return self

    @property
    def m(self) -> int:
        return len(self.states)

    @property
    def k(self) -> int:
        return sum(len(state.members) for state in self.states)

    @property
    def combination_index(self) -> dict[EventCombination, int]:
        return {
            member.combination: state.label
            for state in self.states
            for member in state.members
        }

    def state_of(self, combination: EventCombination) -> int | None:
        return self.combination_index.get(combination.project(self.factor_names))

    def state(self, label: int) -> UpliftState:
        return self.states[label - 1]

    def partition(self) -> set[frozenset[EventCombination]]:
        """Label-free view of the grouping, for comparing two maps."""
        return {
            frozenset(member.combination for member in state.members)
            for state in self.states
        }


class DusResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    state_map: StateMap
    evidence: list[FactorEvidence]
    combinations: list[LabeledCombination]
    combination_stats: list[CombinationStats]
    decisions: list[MergeDecision]
    audit: list[str] = Field(description="One decision per line")
