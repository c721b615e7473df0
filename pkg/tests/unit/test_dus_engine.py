import pytest

from fse_forecast.errors import (
    DomainError,
    DusStepError,
    MissingBaselineError,
    NoSignificantFactorError,
)
from fse_forecast.models.series import DemandSeries, EventCalendar, EventCombination, EventFactor
from fse_forecast.models.states import CombinationStats, MergePolicy, UpliftSample
from fse_forecast.services.dus_engine import (
    DusEngine,
    assign_new_combination,
    average_uplift_per_combination,
    compute_uplifts,
    enumerate_combinations,
    merge_into_states,
    run_dus,
    screen_significant_factors,
)

MAJOR = EventCombination.of({"promotion": "major"})
MINOR = EventCombination.of({"promotion": "minor"})


def _stats(levels: dict[str, str], samples: list[float]) -> CombinationStats:
    mean = sum(samples) / len(samples)
    return CombinationStats(
        combination=EventCombination.of(levels), mean=mean, count=len(samples), samples=samples
    )


def _sample(t: int, levels: dict[str, str], uplift: float) -> UpliftSample:
    return UpliftSample(
        week_index=t, week=str(t + 1), combination=EventCombination.of(levels), uplift=uplift
    )


def test_compute_uplifts():
    demand = DemandSeries.from_values([400.0, 1000.0, 410.0])
    calendar = EventCalendar(
        weeks=demand.weeks,
        factor_names=("promotion",),
        events=[None, {"promotion": "major"}, None],
    )

    samples = compute_uplifts(demand, [400.0, 400.0, 400.0], calendar)

    assert len(samples) == 1
    assert samples[0].uplift == 600.0
    assert samples[0].week == "2"
    assert samples[0].combination == MAJOR


def test_compute_uplifts_without_events():
    demand = DemandSeries.from_values([1.0, 2.0, 3.0])

    assert compute_uplifts(demand, [1.0] * 3, EventCalendar.empty(demand.weeks)) == []


def test_compute_uplifts_names_missing_baseline_week(promo_case):
    demand, baseline, calendar = promo_case
    baseline[3] = None

    with pytest.raises(MissingBaselineError) as exc_info:
        compute_uplifts(demand, baseline, calendar)

    assert exc_info.value.weeks == ["4"]


def test_screen_keeps_only_significant_factor(promo_case, promo_factors):
    demand, baseline, calendar = promo_case
    samples = compute_uplifts(demand, baseline, calendar)

    screened = screen_significant_factors(samples, promo_factors)
    evidence = {item.factor.name: item for item in screened}

    assert evidence["promotion"].significant
    assert evidence["promotion"].effect.p_value < 1e-6
    assert not evidence["display"].significant


def test_screen_without_significant_factor():
    samples = [
        _sample(0, {"promotion": "major"}, 10.0),
        _sample(1, {"promotion": "major"}, 20.0),
        _sample(2, {"promotion": "minor"}, 20.0),
        _sample(3, {"promotion": "minor"}, 10.0),
    ]
    factors = [EventFactor(name="promotion", levels=("major", "minor"))]

    with pytest.raises(NoSignificantFactorError):
        screen_significant_factors(samples, factors)


def test_enumerate_observed_combinations_only():
    display = EventFactor(name="display", levels=("entrance", "fge", "gondola"))
    promotion = EventFactor(name="promotion", levels=("major", "minor"))
    observed = [
        {"promotion": "major", "display": "entrance"},
        {"promotion": "major", "display": "fge"},
        {"promotion": "minor", "display": "fge"},
        {"promotion": "minor", "display": "entrance"},
        {"promotion": "minor", "display": "gondola"},
    ]
    samples = [_sample(t, levels, 1.0) for t, levels in enumerate(observed * 2)]

    labeled = enumerate_combinations([display, promotion], samples)

    assert [item.label for item in labeled] == [1, 2, 3, 4, 5]
    assert [item.combination.assignment for item in labeled] == sorted(
        item.combination.assignment for item in labeled
    )


def test_enumerate_single_level():
    promotion = EventFactor(name="promotion", levels=("major", "minor"))
    samples = [_sample(0, {"promotion": "major"}, 5.0)]

    labeled = enumerate_combinations([promotion], samples)

    assert len(labeled) == 1
    assert labeled[0].combination == MAJOR


def test_average_uplift_per_combination():
    promotion = EventFactor(name="promotion", levels=("major", "minor"))
    samples = [
        _sample(0, {"promotion": "major"}, 10.0),
        _sample(1, {"promotion": "major"}, 20.0),
        _sample(2, {"promotion": "minor"}, 7.0),
    ]
    labeled = enumerate_combinations([promotion], samples)

    major, minor = average_uplift_per_combination(samples, labeled)

    assert (major.mean, major.count, major.variance) == (15.0, 2, 50.0)
    assert (minor.mean, minor.count, minor.variance) == (7.0, 1, None)


def test_merge_overlapping_small_means():
    stats = [
        _stats({"mechanic": "discount", "display": "in_store"}, [10.0, 16.0, 22.0]),
        _stats({"mechanic": "bundle", "display": "in_store"}, [9.8, 15.8, 21.8]),
    ]

    state_map = merge_into_states(stats)

    assert state_map.m == 1
    assert state_map.states[0].mean_uplift == pytest.approx(15.9)
    assert state_map.states[0].sample_count == 6


def test_merge_keeps_separated_means_apart():
    stats = [
        _stats({"promotion": "major", "display": "fge"}, [14820.0, 14833.0, 14846.0]),
        _stats({"promotion": "major", "display": "entrance"}, [19800.0, 19816.0, 19832.0]),
    ]

    state_map = merge_into_states(stats)

    assert state_map.m == 2
    assert state_map.states[0].mean_uplift == pytest.approx(19816.0)
    assert state_map.state(2).members[0].combination == stats[0].combination


def test_merge_single_combination():
    stats = [_stats({"promotion": "major"}, [5.0])]

    state_map = merge_into_states(stats)

    assert state_map.m == 1
    assert state_map.combination_index == {MAJOR: 1}


def test_relative_tolerance_for_tiny_groups():
    policy = MergePolicy(fallback_rel_tol=0.15)
    near = [_stats({"promotion": "major"}, [100.0]), _stats({"promotion": "minor"}, [110.0])]
    far = [_stats({"promotion": "major"}, [100.0]), _stats({"promotion": "minor"}, [200.0])]

    assert merge_into_states(near, policy).m == 1
    assert merge_into_states(far, policy).m == 2


def test_merge_is_transitive_and_order_independent():
    stats = [
        _stats({"g": "a"}, [100.0]),
        _stats({"g": "b"}, [114.0]),
        _stats({"g": "c"}, [130.0]),
        _stats({"g": "d"}, [500.0]),
    ]

    forward = merge_into_states(stats)
    backward = merge_into_states(list(reversed(stats)))

    assert forward.m == 2
    assert forward.partition() == backward.partition()
    assert forward.states[0].members[0].combination == EventCombination.of({"g": "d"})
    assert sum(len(s.members) for s in forward.states) == forward.k == 4


def test_assign_nearest(truth_state_map):
    new = EventCombination.of({"promotion": "major", "display": "gondola"})

    updated = assign_new_combination(truth_state_map, new, expected_uplift=5000.0)

    assert updated.state_of(new) == 3
    assert updated.state(3).mean_uplift == 5091.0
    assert truth_state_map.state_of(new) is None


def test_assign_new_state(truth_state_map):
    new = EventCombination.of({"promotion": "major", "display": "gondola"})

    updated = assign_new_combination(truth_state_map, new, 9000.0, mode="new_state")

    assert updated.m == 6
    assert updated.state_of(new) == 6


def test_assign_manual(truth_state_map):
    new = EventCombination.of({"promotion": "major", "display": "gondola"})

    updated = DusEngine().assign(truth_state_map, new, mode="manual", state=2)

    assert updated.combination_index[new] == 2


def test_assign_errors(truth_state_map):
    new = EventCombination.of({"promotion": "major", "display": "gondola"})
    known = EventCombination.of({"promotion": "major", "display": "fge"})

    with pytest.raises(DomainError):
        assign_new_combination(truth_state_map, new)
    with pytest.raises(DomainError):
        assign_new_combination(truth_state_map, new, mode="manual", state=9)
    with pytest.raises(DomainError):
        assign_new_combination(truth_state_map, known, 1.0)
    with pytest.raises(DomainError):
        assign_new_combination(
            truth_state_map, EventCombination.of({"promotion": "major"}), 1.0
        )


def test_run_dus_end_to_end(promo_case, promo_factors):
    demand, baseline, calendar = promo_case

    result = run_dus(demand, baseline, calendar, promo_factors)

    assert result.state_map.factor_names == ("promotion",)
    assert result.state_map.partition() == {frozenset({MAJOR}), frozenset({MINOR})}
    assert result.state_map.states[0].mean_uplift == pytest.approx(1000.0)
    assert result.state_map.states[1].mean_uplift == pytest.approx(200.0)
    assert result.audit[0] == "step 0: 12 uplift samples from event weeks"
    assert any(line.startswith("step 1: factor display") for line in result.audit)
    assert any("distinct" in line for line in result.audit if line.startswith("step 4"))
    assert [d.rule for d in result.decisions] == ["welch"]


def test_run_dus_is_invariant_to_level_shift(promo_case, promo_factors):
    demand, baseline, calendar = promo_case
    shifted = DemandSeries.from_values([v + 500.0 for v in demand.values])

    original = run_dus(demand, baseline, calendar, promo_factors)
    moved = run_dus(shifted, [b + 500.0 for b in baseline], calendar, promo_factors)

    assert moved.state_map.partition() == original.state_map.partition()
    for a, b in zip(original.evidence, moved.evidence):
        assert a.effect.f_statistic == pytest.approx(b.effect.f_statistic, rel=1e-6)


def test_run_dus_is_deterministic(promo_case, promo_factors):
    demand, baseline, calendar = promo_case

    first = run_dus(demand, baseline, calendar, promo_factors)
    second = run_dus(demand, baseline, calendar, promo_factors)

    assert first.model_dump_json() == second.model_dump_json()


def test_run_dus_reports_failing_step(promo_case):
    demand, baseline, calendar = promo_case
    flat = DemandSeries.from_values([100.0 if e is None else 150.0 for e in calendar.events])
    factors = [EventFactor(name="promotion", levels=("major", "minor"))]

    with pytest.raises(DusStepError) as exc_info:
        run_dus(flat, baseline, calendar, factors)

    assert exc_info.value.step == 1
    assert exc_info.value.exit_code == 1
    assert isinstance(exc_info.value.cause, NoSignificantFactorError)


def test_run_dus_missing_baseline_is_input_error(promo_case, promo_factors):
    demand, baseline, calendar = promo_case
    baseline[1] = None

    with pytest.raises(DusStepError) as exc_info:
        run_dus(demand, baseline, calendar, promo_factors)

    assert exc_info.value.step == 0
    assert exc_info.value.exit_code == 2


def test_engine_uses_its_policy(promo_case, promo_factors):
    demand, baseline, calendar = promo_case

    result = DusEngine(alpha=0.05, policy=MergePolicy(test_alpha=1e-300)).run(
        demand, baseline, calendar, promo_factors
    )

    assert result.state_map.m == 1
