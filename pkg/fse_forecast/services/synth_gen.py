"""
Seeded synthetic demand from the state-regression process.

Noise is drawn from numpy's PCG64 bit generator seeded with the generator seed; the
recursion starts at the stationary mean and runs ``burn_in`` steps before the
kept horizon. The event-free counterfactual path reuses the same noise. The
supplied baseline forecast sees only the observable demand and calendar: SES fitted
and smoothed with event weeks skipped.
"""
from typing import Any, Literal

import numpy as np
from scipy import signal

from fse_forecast.errors import DomainError, NonStationarySpecError, UnindexedCombinationError
from fse_forecast.models.dataset import DatasetBundle
from fse_forecast.models.series import DemandSeries, EventCalendar, EventCombination, EventFactor
from fse_forecast.models.states import StateMap, StateMember, UpliftState
from fse_forecast.models.synth import CalendarEvent, GeneratorSpec, SyntheticBundle
from fse_forecast.observability import get_logger
from fse_forecast.services.baselines import cleansed_baseline
from fse_forecast.services.fse_model import ar_root_moduli

logger = get_logger(__name__)

Shape = Literal["A", "B"]

# Shape A: 100 weeks, a promotion every 6 weeks from week index 3 (16 in all, 8 major
# and 8 minor). Five of the eight promotion x display cells occur; the other three
# are infeasible. Training weeks hold 13 promotions, every cell at least twice, so
# both factors are testable on the training window alone.
# Complex AR roots of modulus 0.6 at angle 3*pi/7 make the lag-6 carry-over exactly 0.
SHAPE_A_FACTORS = {
    "display": ["entrance", "fge", "fixture", "gondola"],
    "promotion": ["major", "minor"],
}
SHAPE_A_STATES = [
    ({"promotion": "major", "display": "entrance"}, 19816.0),
    ({"promotion": "major", "display": "fge"}, 14833.0),
    ({"promotion": "minor", "display": "fge"}, 5091.0),
    ({"promotion": "minor", "display": "fixture"}, 4121.0),
    ({"promotion": "minor", "display": "gondola"}, 3466.0),
]
SHAPE_A_TRAIN_COUNTS = [3, 3, 3, 2, 2]
SHAPE_A_HOLDOUT = [0, 1, 2]

# Shape B: 120 weeks, promotions on every odd week index (60 in all, 32 discount
# and 28 bundle).
SHAPE_B_FACTORS = {"display": ["end_cap", "flyer", "in_store"], "mechanic": ["bundle", "discount"]}
SHAPE_B_STATES = [
    ({"mechanic": "discount", "display": "end_cap"}, 311.0),
    ({"mechanic": "bundle", "display": "end_cap"}, 213.3),
    ({"mechanic": "discount", "display": "flyer"}, 160.48),
    ({"mechanic": "discount", "display": "in_store"}, 16.0),
    ({"mechanic": "bundle", "display": "in_store"}, 15.8),
    ({"mechanic": "bundle", "display": "flyer"}, 7.3),
]
SHAPE_B_COUNTS = [11, 9, 11, 10, 10, 9]


def _truth_map(states: list[tuple[dict[str, str], float]]) -> StateMap:
    combinations = [EventCombination.of(levels) for levels, _ in states]
    return StateMap(
        factor_names=combinations[0].factor_names,
        states=tuple(
            UpliftState(
                label=label,
                members=(StateMember(combination=combination, mean_uplift=beta),),
                mean_uplift=beta,
            )
            for label, (combination, (_, beta)) in enumerate(
                zip(combinations, states), start=1
            )
        ),
    )


def _shape_a(seed: int) -> dict[str, Any]:
    rng = np.random.Generator(np.random.PCG64([seed, 1]))
    training = [i for i, count in enumerate(SHAPE_A_TRAIN_COUNTS) for _ in range(count)]
    order = [training[i] for i in rng.permutation(len(training))] + SHAPE_A_HOLDOUT
    combinations = [EventCombination.of(levels) for levels, _ in SHAPE_A_STATES]
    return {
        "n_weeks": 100,
        "p": 2,
        "alphas": [0.267, -0.36],
        "level": 450.0,
        "betas": [beta for _, beta in SHAPE_A_STATES],
        "sigma": 15.0,
        "calendar_pattern": [
            CalendarEvent(week=3 + 6 * i, combination=combinations[state])
            for i, state in enumerate(order)
        ],
        "state_map": _truth_map(SHAPE_A_STATES),
        "factor_levels": SHAPE_A_FACTORS,
    }


def _shape_b(seed: int) -> dict[str, Any]:
    rng = np.random.Generator(np.random.PCG64([seed, 2]))
    order = rng.permutation(np.repeat(np.arange(len(SHAPE_B_STATES)), SHAPE_B_COUNTS))
    combinations = [EventCombination.of(levels) for levels, _ in SHAPE_B_STATES]
    return {
        "n_weeks": 120,
        "p": 2,
        "alphas": [0.3, 0.15],
        "level": 7.0,
        "betas": [beta for _, beta in SHAPE_B_STATES],
        "sigma": 5.0,
        "calendar_pattern": [
            CalendarEvent(week=1 + 2 * i, combination=combinations[int(state)])
            for i, state in enumerate(order)
        ],
        "state_map": _truth_map(SHAPE_B_STATES),
        "factor_levels": SHAPE_B_FACTORS,
    }


def make_company_shaped_spec(shape: Shape, seed: int = 0, **overrides: Any) -> GeneratorSpec:
    """Generator settings shaped like one of the two case companies.

    ``level`` (the non-event mean) fixes alpha0 unless alpha0 is overridden.
    """
    match shape:
        case "A":
            base = _shape_a(seed)
        case "B":
            base = _shape_b(seed)
        case _:
            raise DomainError(f"unknown shape '{shape}', expected A or B")

    fields = {**base, "seed": seed, **overrides}
    if "alphas" in overrides and "p" not in overrides:
        fields["p"] = len(fields["alphas"])
    level = fields.pop("level")
    fields.setdefault("alpha0", level * (1.0 - sum(fields["alphas"])))
    return GeneratorSpec.model_validate(fields)


def _simulate(spec: GeneratorSpec, drive: np.ndarray, start: float) -> np.ndarray:
    if spec.p == 0:
        return drive
    a = np.concatenate([[1.0], -np.asarray(spec.alphas)])
    zi = signal.lfiltic([1.0], a, y=np.full(spec.p, start))
    path, _ = signal.lfilter([1.0], a, drive, zi=zi)
    return path


def _calendar(spec: GeneratorSpec, weeks: list[str]) -> EventCalendar:
    names = tuple(sorted(spec.factor_levels)) or (
        spec.calendar_pattern[0].combination.factor_names if spec.calendar_pattern else ()
    )
    events: list[dict[str, str] | None] = [None] * spec.n_weeks
    for event in spec.calendar_pattern:
        events[event.week] = event.combination.levels
    return EventCalendar(weeks=weeks, factor_names=names, events=events)


def generate(spec: GeneratorSpec) -> SyntheticBundle:
    moduli = ar_root_moduli(spec.alphas)
    if any(r <= 1.0 for r in moduli):
        raise NonStationarySpecError(moduli)

    states = np.zeros(spec.n_weeks)
    if spec.calendar_pattern:
        if spec.state_map is None:
            raise DomainError("calendar events need a state map")
        betas = np.asarray(spec.betas)
        for event in spec.calendar_pattern:
            label = spec.state_map.state_of(event.combination)
            if label is None:
                raise UnindexedCombinationError(str(event.week + 1), str(event.combination))
            states[event.week] = betas[label - 1]

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noise = spec.sigma * rng.standard_normal(spec.burn_in + spec.n_weeks)
    mean = spec.alpha0 / (1.0 - sum(spec.alphas))

    base = spec.alpha0 + noise
    uplift = np.concatenate([np.zeros(spec.burn_in), states])
    actual = _simulate(spec, base + uplift, mean)[spec.burn_in :]
    counterfactual = _simulate(spec, base, mean)[spec.burn_in :]

    demand = DemandSeries.from_values(actual)
    calendar = _calendar(spec, demand.weeks)
    baseline = cleansed_baseline(actual, calendar.event_mask())
    logger.debug(
        "Series generated",
        n_weeks=spec.n_weeks,
        seed=spec.seed,
        events=len(spec.calendar_pattern),
    )
    return SyntheticBundle(
        demand=demand,
        calendar=calendar,
        truth=spec,
        baseline=baseline,
        counterfactual=counterfactual.tolist(),
    )


def to_dataset(bundle: SyntheticBundle) -> DatasetBundle:
    """The CSV-ready view of a synthetic bundle."""
    levels = bundle.truth.factor_levels or {
        name: sorted({e.combination.levels[name] for e in bundle.truth.calendar_pattern})
        for name in bundle.calendar.factor_names
    }
    return DatasetBundle(
        demand=bundle.demand,
        calendar=bundle.calendar,
        factor_declarations=[
            EventFactor(name=name, levels=tuple(values)) for name, values in sorted(levels.items())
        ],
        baseline_forecasts=bundle.baseline,
    )
