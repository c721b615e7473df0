"""
Demand uplift states.

Uplifts (actual minus baseline) on event weeks are screened for significant
factors, grouped into observed factor-level combinations, averaged, and merged
into states whose mean uplifts cannot be told apart.
"""
import itertools
from collections import defaultdict
from collections.abc import Callable, Sequence
from typing import Literal, TypeVar

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from fse_forecast.errors import (
    DomainError,
    DusStepError,
    ForecastingError,
    InsufficientDataError,
    MissingBaselineError,
    NoSignificantFactorError,
)
from fse_forecast.models.series import (
    DemandSeries,
    EventCalendar,
    EventCombination,
    EventFactor,
)
from fse_forecast.models.states import (
    CombinationStats,
    DusResult,
    FactorEvidence,
    LabeledCombination,
    MergeDecision,
    MergePolicy,
    StateMap,
    StateMember,
    UpliftSample,
    UpliftState,
)
from fse_forecast.observability import get_logger
from fse_forecast.services.stats_kernel import anova_factor_screen, welch_t_test

logger = get_logger(__name__)

AssignMode = Literal["nearest", "new_state", "manual"]
T = TypeVar("T")


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def compute_uplifts(
    demand: DemandSeries,
    baseline: Sequence[float | None],
    calendar: EventCalendar,
) -> list[UpliftSample]:
    """One sample per event week: actual demand minus the baseline forecast."""
    n = len(demand)
    if len(baseline) != n or calendar.weeks != demand.weeks:
        raise DomainError("demand, baseline and calendar must share one weekly index")

    missing = [
        demand.weeks[t]
        for t in calendar.event_weeks()
        if baseline[t] is None or not np.isfinite(baseline[t])
    ]
    if missing:
        raise MissingBaselineError(missing)

    return [
        UpliftSample(
            week_index=t,
            week=demand.weeks[t],
            combination=combination,
            uplift=demand.values[t] - float(baseline[t]),
        )
        for t in calendar.event_weeks()
        if (combination := calendar.combination_at(t)) is not None
    ]


def screen_significant_factors(
    samples: Sequence[UpliftSample],
    candidate_factors: Sequence[EventFactor],
    alpha: float = 0.05,
) -> list[FactorEvidence]:
    """Main-effect ANOVA on the uplifts.

    Returns evidence for every testable factor; ``significant`` marks those
    with p < alpha. Raises when no factor is significant.
    """
    if len(samples) < 2:
        raise InsufficientDataError(f"factor screening needs 2 uplift samples, got {len(samples)}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")

    responses = [sample.uplift for sample in samples]
    assignments = {
        factor.name: [sample.combination.levels[factor.name] for sample in samples]
        for factor in candidate_factors
    }
    effects = anova_factor_screen(responses, assignments)

    evidence = [
        FactorEvidence(
            factor=factor,
            effect=effects[factor.name],
            significant=effects[factor.name].p_value < alpha,
        )
        for factor in candidate_factors
        if factor.name in effects
    ]
    if not any(item.significant for item in evidence):
        raise NoSignificantFactorError(
            f"no factor is significant at {alpha}; define the states manually"
        )
    return evidence


def enumerate_combinations(
    significant_factors: Sequence[EventFactor], samples: Sequence[UpliftSample]
) -> list[LabeledCombination]:
    """Observed combinations of the significant factors, labelled 1..k."""
    if not significant_factors:
        raise DomainError("at least one significant factor is required")
    names = [factor.name for factor in significant_factors]
    observed = {sample.combination.project(names) for sample in samples}
    ordered = sorted(observed, key=lambda combination: combination.assignment)
    return [
        LabeledCombination(label=label, combination=combination)
        for label, combination in enumerate(ordered, start=1)
    ]


def average_uplift_per_combination(
    samples: Sequence[UpliftSample], combinations: Sequence[LabeledCombination]
) -> list[CombinationStats]:
    if not combinations:
        raise DomainError("no combinations to average")
    names = combinations[0].combination.factor_names
    grouped: dict[EventCombination, list[float]] = defaultdict(list)
    for sample in samples:
        grouped[sample.combination.project(names)].append(sample.uplift)

    result = []
    for labeled in combinations:
        values = grouped.get(labeled.combination)
        if not values:
            raise InsufficientDataError(f"combination {labeled.combination} has no samples")
        arr = np.asarray(values)
        result.append(
            CombinationStats(
                combination=labeled.combination,
                mean=float(arr.mean()),
                count=len(values),
                variance=float(arr.var(ddof=1)) if len(values) > 1 else None,
                samples=values,
            )
        )
    return result


def _compare(a: CombinationStats, b: CombinationStats, policy: MergePolicy) -> MergeDecision:
    if a.count >= 2 and b.count >= 2:
        p_value = welch_t_test(a.samples, b.samples).p_value
        assert p_value is not None
        return MergeDecision(
            first=a.combination,
            second=b.combination,
            rule="welch",
            value=p_value,
            merged=p_value >= policy.test_alpha,
        )
    scale = max(abs(a.mean), abs(b.mean))
    rel = 0.0 if scale == 0 else abs(a.mean - b.mean) / scale
    return MergeDecision(
        first=a.combination,
        second=b.combination,
        rule="relative_tolerance",
        value=rel,
        merged=rel <= policy.fallback_rel_tol,
    )


def _merge(
    stats: Sequence[CombinationStats], policy: MergePolicy
) -> tuple[StateMap, list[MergeDecision]]:
    if not stats:
        raise DomainError("at least one combination is required")

    groups = DisjointSet(range(len(stats)))
    decisions = []
    for i, j in itertools.combinations(range(len(stats)), 2):
        decision = _compare(stats[i], stats[j], policy)
        decisions.append(decision)
        if decision.merged:
            groups.merge(i, j)

    def pooled_mean(members: Sequence[int]) -> float:
        total = sum(stats[i].mean * stats[i].count for i in members)
        return total / sum(stats[i].count for i in members)

    subsets = [sorted(subset) for subset in groups.subsets()]
    subsets.sort(key=lambda members: (-pooled_mean(members), members[0]))

    states = tuple(
        UpliftState(
            label=label,
            members=tuple(
                StateMember(
                    combination=stats[i].combination,
                    mean_uplift=stats[i].mean,
                    count=stats[i].count,
                )
                for i in members
            ),
            mean_uplift=pooled_mean(members),
            sample_count=sum(stats[i].count for i in members),
        )
        for label, members in enumerate(subsets, start=1)
    )
    state_map = StateMap(factor_names=stats[0].combination.factor_names, states=states)
    return state_map, decisions


def merge_into_states(
    stats: Sequence[CombinationStats], policy: MergePolicy = MergePolicy()
) -> StateMap:
    """Union of every indistinguishable pair; states ordered by descending mean."""
    state_map, _ = _merge(stats, policy)
    return state_map


def assign_new_combination(
    state_map: StateMap,
    new_combination: EventCombination,
    expected_uplift: float | None = None,
    mode: AssignMode = "nearest",
    state: int | None = None,
) -> StateMap:
    """Index a combination that was not observed when the states were built."""
    combination = new_combination.project(state_map.factor_names)
    if combination.factor_names != state_map.factor_names:
        raise DomainError(
            f"combination {new_combination} must assign {list(state_map.factor_names)}"
        )
    if combination in state_map.combination_index:
        raise DomainError(f"combination {combination} is already indexed")

    match mode:
        case "nearest":
            if expected_uplift is None:
                raise DomainError("nearest assignment needs an expected uplift")
            candidates = [s for s in state_map.states if s.mean_uplift is not None]
            if not candidates:
                raise DomainError("no state has a mean uplift to compare against")
            target = min(
                candidates,
                key=lambda s: (abs(s.mean_uplift - expected_uplift), s.label),  # type: ignore
            ).label
        case "new_state":
            added = UpliftState(
                label=state_map.m + 1,
                members=(StateMember(combination=combination, mean_uplift=expected_uplift),),
                mean_uplift=expected_uplift,
            )
            return state_map.model_copy(update={"states": state_map.states + (added,)})
        case "manual":
            if state is None or not 1 <= state <= state_map.m:
                raise DomainError(f"state {state} outside 1..{state_map.m}")
            target = state
        case _:
            raise DomainError(f"unknown assignment mode '{mode}'")

    member = StateMember(combination=combination, mean_uplift=expected_uplift)
    states = tuple(
        s.model_copy(update={"members": s.members + (member,)}) if s.label == target else s
        for s in state_map.states
    )
    logger.info("Combination assigned", combination=str(combination), state=target, mode=mode)
    return state_map.model_copy(update={"states": states})


def _step(step: int, action: Callable[[], T]) -> T:
    try:
        return action()
    except DusStepError:
        raise
    except ForecastingError as exc:
        raise DusStepError(step, exc) from exc


def run_dus(
    demand: DemandSeries,
    baseline: Sequence[float | None],
    calendar: EventCalendar,
    candidate_factors: Sequence[EventFactor],
    alpha: float = 0.05,
    policy: MergePolicy = MergePolicy(),
) -> DusResult:
    """Steps 0-4 end to end, with an audit line for every decision."""
    audit: list[str] = []

    def uplifts() -> list[UpliftSample]:
        unknown = {f.name for f in candidate_factors} - set(calendar.factor_names)
        if unknown:
            raise DomainError(f"factors {sorted(unknown)} are not in the calendar")
        return compute_uplifts(demand, baseline, calendar)

    samples = _step(0, uplifts)
    audit.append(f"step 0: {len(samples)} uplift samples from event weeks")

    evidence = _step(1, lambda: screen_significant_factors(samples, candidate_factors, alpha))
    tested = {item.factor.name for item in evidence}
    for factor in candidate_factors:
        if factor.name not in tested:
            audit.append(f"step 1: factor {factor.name} not testable, excluded")
    for item in evidence:
        e = item.effect
        verdict = "significant" if item.significant else "not significant"
        audit.append(
            f"step 1: factor {e.factor} F={_fmt(e.f_statistic)} p={_fmt(e.p_value)} "
            f"df=({e.df_num},{e.df_den}) {verdict}"
        )
    significant = [item.factor for item in evidence if item.significant]

    combinations = _step(2, lambda: enumerate_combinations(significant, samples))
    for labeled in combinations:
        audit.append(f"step 2: combination {labeled.label} = {labeled.combination}")

    stats = _step(3, lambda: average_uplift_per_combination(samples, combinations))
    for labeled, item in zip(combinations, stats):
        audit.append(
            f"step 3: combination {labeled.label} mean={_fmt(item.mean)} "
            f"n={item.count} var={_fmt(item.variance)}"
        )

    state_map, decisions = _step(4, lambda: _merge(stats, policy))
    label_of = {labeled.combination: labeled.label for labeled in combinations}
    for decision in decisions:
        audit.append(
            f"step 4: {label_of[decision.first]} ~ {label_of[decision.second]} "
            f"{decision.rule}={_fmt(decision.value)} "
            f"{'merged' if decision.merged else 'distinct'}"
        )
    for s in state_map.states:
        members = ", ".join(str(label_of[m.combination]) for m in s.members)
        audit.append(
            f"step 4: state {s.label} = {{{members}}} mean={_fmt(s.mean_uplift)} "
            f"n={s.sample_count}"
        )

    logger.info(
        "Uplift states built",
        samples=len(samples),
        significant=[f.name for f in significant],
        k=len(combinations),
        m=state_map.m,
    )
    return DusResult(
        state_map=state_map,
        evidence=evidence,
        combinations=combinations,
        combination_stats=stats,
        decisions=decisions,
        audit=audit,
    )


class DusEngine:
    """Runs the uplift-state construction with one screening level and merge policy."""

    def __init__(self, alpha: float = 0.05, policy: MergePolicy | None = None):
        self.alpha = alpha
        self.policy = policy or MergePolicy()

    def run(
        self,
        demand: DemandSeries,
        baseline: Sequence[float | None],
        calendar: EventCalendar,
        candidate_factors: Sequence[EventFactor],
    ) -> DusResult:
        return run_dus(demand, baseline, calendar, candidate_factors, self.alpha, self.policy)

    def assign(
        self,
        state_map: StateMap,
        new_combination: EventCombination,
        expected_uplift: float | None = None,
        mode: AssignMode = "nearest",
        state: int | None = None,
    ) -> StateMap:
        return assign_new_combination(state_map, new_combination, expected_uplift, mode, state)
