import os

# Configure test environment before importing package modules
os.environ["FSE_ENABLE_TRACING"] = "false"
os.environ["FSE_DEBUG"] = "true"
os.environ["FSE_LOG_LEVEL"] = "WARNING"
os.environ["FSE_REPLICATE_WORKERS"] = "2"

# ruff: noqa: E402
import numpy as np
import pytest

from fse_forecast.models.dataset import DatasetBundle
from fse_forecast.models.series import DemandSeries, EventCalendar, EventCombination, EventFactor
from fse_forecast.models.states import CombinationStats, StateMap
from fse_forecast.observability import setup_logging
from fse_forecast.services.dus_engine import merge_into_states
from fse_forecast.services.synth_gen import (
    SHAPE_A_STATES,
    generate,
    make_company_shaped_spec,
    to_dataset,
)
from fse_forecast.stores.csv_store import save_bundle


@pytest.fixture(scope="session", autouse=True)
def stderr_logging():
    """Route structured logs to stderr so stdout carries only command output."""
    setup_logging()


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same draws."""
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def shape_a_bundle():
    """Shape-A synthetic bundle (100 weeks, 16 promotions, 5 states), seed 0."""
    return generate(make_company_shaped_spec("A", seed=0))


@pytest.fixture(scope="session")
def shape_a_dataset(shape_a_bundle) -> DatasetBundle:
    return to_dataset(shape_a_bundle)


@pytest.fixture
def bundle_dir(tmp_path, shape_a_dataset):
    """Shape-A bundle written as demand/calendar/factors/forecasts CSV files."""
    directory = tmp_path / "bundle"
    save_bundle(shape_a_dataset, directory)
    return directory


@pytest.fixture
def truth_state_map() -> StateMap:
    """Five singleton states with the shape-A mean uplifts."""
    stats = [
        CombinationStats(combination=EventCombination.of(levels), mean=mean, count=1)
        for levels, mean in SHAPE_A_STATES
    ]
    return merge_into_states(stats)


@pytest.fixture
def promo_factors() -> list[EventFactor]:
    return [
        EventFactor(name="display", levels=("entrance", "gondola")),
        EventFactor(name="promotion", levels=("major", "minor")),
    ]


@pytest.fixture
def promo_case():
    """Constant baseline 100 with 12 event weeks whose uplift depends on promotion only.

    Returns (demand, baseline, calendar).
    """
    uplifts = {
        ("entrance", "major"): [1000.0, 1010.0, 990.0],
        ("gondola", "major"): [1005.0, 995.0, 1000.0],
        ("entrance", "minor"): [200.0, 210.0, 190.0],
        ("gondola", "minor"): [205.0, 195.0, 200.0],
    }
    n = 30
    values = [100.0] * n
    events: list[dict[str, str] | None] = [None] * n
    t = 1
    for round_ in range(3):
        for (display, promotion), samples in uplifts.items():
            values[t] = 100.0 + samples[round_]
            events[t] = {"display": display, "promotion": promotion}
            t += 2

    demand = DemandSeries.from_values(values)
    calendar = EventCalendar(
        weeks=demand.weeks, factor_names=("display", "promotion"), events=events
    )
    return demand, [100.0] * n, calendar
