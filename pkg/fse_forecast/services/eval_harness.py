"""
Holdout evaluation of one case and Monte Carlo replication over seeds.

Every stage runs inside its own span; a failure is re-raised as a StageError
naming the stage. Only the training window feeds the baseline, the states and
the fit.
"""
import asyncio
import time
from collections import Counter
from collections.abc import Iterator
from contextlib import contextmanager
from typing import NamedTuple

import numpy as np

from fse_forecast.config import CaseConfig
from fse_forecast.errors import ConfigError, DomainError, ForecastingError, StageError
from fse_forecast.models.dataset import DatasetBundle
from fse_forecast.models.fit import FittedModel, FseFit, OrderSelection, StateDesign
from fse_forecast.models.reports import (
    CaseReport,
    DescriptiveStats,
    MetricSummary,
    ReplicationSummary,
    SeedOutcome,
    SeriesRow,
)
from fse_forecast.models.series import EventCalendar, EventFactor
from fse_forecast.models.states import DusResult, MergePolicy, StateMap
from fse_forecast.models.synth import GeneratorSpec
from fse_forecast.models.stats import TestResult
from fse_forecast.observability import get_logger, stage_span
from fse_forecast.services import accuracy_metrics as metrics
from fse_forecast.services.baselines import (
    cleansed_baseline,
    ses_fit,
    ses_forecast,
    ses_one_step,
)
from fse_forecast.services.dus_engine import DusEngine
from fse_forecast.services.fse_model import FseModelService, build_state_design
from fse_forecast.services.synth_gen import generate, make_company_shaped_spec, to_dataset

logger = get_logger(__name__)


class TrainingOutcome(NamedTuple):
    trail: list[TestResult]
    dus: DusResult | None
    state_map: StateMap | None
    design: StateDesign
    order: OrderSelection
    fit: FseFit

    def fitted_model(self, history: np.ndarray, last_week: str) -> FittedModel:
        keep = self.fit.p + self.fit.differencing_applied
        return FittedModel(
            fit=self.fit,
            state_map=self.state_map,
            tail_observations=history[len(history) - keep :].tolist(),
            last_week=last_week,
        )


@contextmanager
def _stage(name: str, **attributes) -> Iterator[None]:
    with stage_span(f"stage.{name}", **attributes) as span:
        try:
            yield
        except ForecastingError as exc:
            span.record_exception(exc)
            raise StageError(name, exc) from exc


def _calendar_factors(bundle: DatasetBundle) -> list[EventFactor]:
    return [f for f in bundle.factor_declarations if f.name in bundle.calendar.factor_names]


def _mean(values: np.ndarray) -> float | None:
    return float(values.mean()) if values.size else None


def describe(bundle: DatasetBundle) -> DescriptiveStats:
    """Promotional vs non-promotional summary over the whole series.

    Forecast errors are measured against the adjusted forecasts when supplied,
    otherwise against the baseline forecasts.
    """
    x = bundle.demand.array()
    mask = bundle.calendar.event_mask()
    stats = {
        "n_weeks": len(x),
        "n_event_weeks": int(mask.sum()),
        "mean_demand_event": _mean(x[mask]),
        "mean_demand_non_event": _mean(x[~mask]),
    }
    if bundle.adjusted_forecasts is not None:
        reference, supplied = "adjusted", bundle.adjusted_forecasts
    elif bundle.baseline_forecasts is not None:
        reference, supplied = "baseline", bundle.baseline_forecasts
    else:
        return DescriptiveStats(**stats)

    f = np.asarray(supplied, dtype=float)

    def split(which: np.ndarray) -> tuple[float | None, float | None]:
        if not which.any():
            return None, None
        try:
            mape = metrics.mape(f[which], x[which])
        except DomainError:
            mape = None
        return metrics.mae(f[which], x[which]), mape

    mae_event, mape_event = split(mask)
    mae_non_event, mape_non_event = split(~mask)
    return DescriptiveStats(
        **stats,
        reference=reference,
        mae_event=mae_event,
        mape_event=mape_event,
        mae_non_event=mae_non_event,
        mape_non_event=mape_non_event,
    )


def _coverage(fit: FseFit, state_map: StateMap, truth: GeneratorSpec) -> list[bool]:
    """Interval hits for alpha0, the alphas and each fitted state's true beta."""
    assert truth.state_map is not None
    betas = [
        truth.betas[truth.state_map.combination_index[state.members[0].combination] - 1]
        for state in state_map.states
    ]
    intervals = fit.regression.confidence_intervals(0.95)
    values = [truth.alpha0, *truth.alphas, *betas]
    return [lo <= value <= hi for value, (lo, hi) in zip(values, intervals, strict=True)]


def _summary(values: list[float]) -> MetricSummary:
    arr = np.asarray(values, dtype=float)
    q05, median, q95 = np.quantile(arr, [0.05, 0.5, 0.95])
    return MetricSummary(mean=float(arr.mean()), q05=q05, median=median, q95=q95)


class EvaluationService:
    def __init__(self, workers: int = 4):
        self.workers = workers

    def train(
        self,
        bundle: DatasetBundle,
        config: CaseConfig,
        train: int,
        state_map: StateMap | None = None,
    ) -> TrainingOutcome:
        """Stationarity, states, order and fit on weeks 0..train-1.

        A given ``state_map`` replaces the uplift-state construction.
        """
        x = bundle.demand.array()
        train_demand = bundle.demand.window(0, train)
        train_calendar = bundle.calendar.window(0, train)
        event_mask = train_calendar.event_mask()
        fse = FseModelService(config.p_max, config.max_diff, config.forecast_mode)

        with _stage("stationarity"):
            trail: list[TestResult] = []
            model_series = train_demand
            if config.difference_policy == "test":
                model_series, trail = fse.stationarity(train_demand, event_mask)
        d = model_series.differencing_applied

        dus = None
        if state_map is None and event_mask.any():
            with _stage("baseline"):
                if bundle.baseline_forecasts is not None:
                    baseline = list(bundle.baseline_forecasts[:train])
                else:
                    baseline = cleansed_baseline(x[:train], event_mask)
            with _stage("dus", events=int(event_mask.sum())):
                policy = MergePolicy(
                    test_alpha=config.merge_alpha, fallback_rel_tol=config.fallback_rel_tol
                )
                dus = DusEngine(config.alpha, policy).run(
                    train_demand, baseline, train_calendar, _calendar_factors(bundle)
                )
                state_map = dus.state_map

        with _stage("design"):
            design = build_state_design(bundle.calendar, state_map)
            train_design = design.window(d, train)

        with _stage("order"):
            order = fse.select_order(model_series, train_design)

        with _stage("fit", p=order.p):
            fitted = fse.fit(model_series, train_design, order.p, trail[-1] if trail else None)

        return TrainingOutcome(trail, dus, state_map, design, order, fitted)

    def build_states(self, bundle: DatasetBundle, config: CaseConfig) -> DusResult:
        """Uplift states from every week of the bundle."""
        mask = bundle.calendar.event_mask()
        if bundle.baseline_forecasts is not None:
            baseline = list(bundle.baseline_forecasts)
        else:
            baseline = cleansed_baseline(bundle.demand.array(), mask)
        policy = MergePolicy(
            test_alpha=config.merge_alpha, fallback_rel_tol=config.fallback_rel_tol
        )
        with _stage("dus", events=int(mask.sum())):
            return DusEngine(config.alpha, policy).run(
                bundle.demand, baseline, bundle.calendar, _calendar_factors(bundle)
            )

    def fit_model(
        self,
        bundle: DatasetBundle,
        config: CaseConfig,
        state_map: StateMap | None = None,
    ) -> FittedModel:
        """Fit on the configured training window, or on every week when unset."""
        n = len(bundle.demand)
        train = config.train_length if config.train_length is not None else n
        if not 0 < train <= n:
            raise ConfigError(f"train_length {train} exceeds the {n}-week series")
        trained = self.train(bundle, config, train, state_map)
        logger.info("Model fitted", p=trained.fit.p, m=trained.fit.m, train_length=train)
        return trained.fitted_model(bundle.demand.array()[:train], bundle.demand.weeks[train - 1])

    def forecast_model(self, model: FittedModel, calendar: EventCalendar) -> list[float]:
        """Recursive forecasts over every week of a future calendar."""
        with _stage("forecast", horizon=len(calendar)):
            design = build_state_design(calendar, model.state_map)
            return FseModelService().forecast(model.fit, model.tail_observations, design)

    def run_case(self, bundle: DatasetBundle, config: CaseConfig) -> CaseReport:
        start_time = time.time()
        demand = bundle.demand
        n = len(demand)
        train = config.resolve_train_length(n)
        x = demand.array()

        logger.info("Starting case", n_weeks=n, train_length=train, holdout_length=n - train)
        trained = self.train(bundle, config, train)
        fitted, design = trained.fit, trained.design
        fse = FseModelService(config.p_max, config.max_diff, config.forecast_mode)

        holdout = x[train:]
        with _stage("forecast", horizon=n - train):
            future = design.window(train, n)
            blind = StateDesign(
                weeks=future.weeks,
                state_labels=future.state_labels,
                matrix=[[0] * future.m for _ in future.weeks],
            )
            forecasts = {
                "fse": fse.forecast(fitted, x[:train], future, holdout),
                "ar": fse.forecast(fitted, x[:train], blind, holdout),
            }
            ses = ses_fit(x[:train])
            if config.forecast_mode == "rolling":
                forecasts["ses"] = ses_one_step(x, ses.alpha)[0][train:].tolist()
            else:
                forecasts["ses"] = ses_forecast(ses, n - train)
            if bundle.baseline_forecasts is not None:
                forecasts["baseline"] = list(bundle.baseline_forecasts[train:])
            if bundle.adjusted_forecasts is not None:
                forecasts["adjusted"] = list(bundle.adjusted_forecasts[train:])

        benchmark = "adjusted" if "adjusted" in forecasts else "ses"
        with _stage("score", benchmark=benchmark):
            accuracy = metrics.build_accuracy_report(
                forecasts,
                holdout,
                benchmark=benchmark,
                candidate="fse",
                msae_variant=config.msae_variant,
                zero_policy=config.mape_zero_policy,
            )

        fse_scores = accuracy.forecasters["fse"]
        bench_scores = accuracy.forecasters[benchmark]
        holdout_mask = bundle.calendar.event_mask()[train:]
        series = [
            SeriesRow(
                week=demand.weeks[train + i],
                actual=float(holdout[i]),
                event=bool(holdout_mask[i]),
                fse_forecast=forecasts["fse"][i],
                benchmark_forecast=forecasts[benchmark][i],
                fse_ae=fse_scores.ae_series[i],
                fse_re=fse_scores.re_series[i],
                benchmark_ae=bench_scores.ae_series[i],
                benchmark_re=bench_scores.re_series[i],
            )
            for i in range(n - train)
        ]

        logger.info(
            "Case completed",
            p=fitted.p,
            m=fitted.m,
            benchmark=benchmark,
            processing_time_ms=(time.time() - start_time) * 1000,
        )
        return CaseReport(
            train_length=train,
            holdout_length=n - train,
            descriptive=describe(bundle),
            kpss_trail=trained.trail,
            factor_evidence=trained.dus.evidence if trained.dus is not None else [],
            state_map=trained.state_map,
            dus_audit=trained.dus.audit if trained.dus is not None else [],
            order=trained.order,
            fit=fitted,
            forecasts=forecasts,
            accuracy=accuracy,
            series=series,
        )

    def _run_seed(self, config: CaseConfig, seed: int) -> SeedOutcome:
        spec = make_company_shaped_spec(config.shape, seed)
        report = self.run_case(to_dataset(generate(spec)), config)
        recovered = (
            spec.state_map is not None
            and report.state_map is not None
            and report.state_map.partition() == spec.state_map.partition()
        )
        coverage = []
        if recovered and report.fit.p == spec.p and report.fit.differencing_applied == 0:
            coverage = _coverage(report.fit, report.state_map, spec)
        return SeedOutcome(
            seed=seed,
            p=report.fit.p,
            m=report.fit.m,
            metrics={
                name: {"mae": acc.mae, "mape": acc.mape, "msae": acc.msae}
                for name, acc in report.accuracy.forecasters.items()
            },
            partition_recovered=recovered,
            coverage=coverage,
        )

    async def replicate(
        self, config: CaseConfig, n_seeds: int | None = None
    ) -> ReplicationSummary:
        """Run independent synthetic cases for consecutive seeds and aggregate them."""
        count = config.n_seeds if n_seeds is None else n_seeds
        if count < 1:
            raise DomainError(f"n_seeds must be at least 1, got {count}")
        seeds = [config.seed + i for i in range(count)]
        semaphore = asyncio.Semaphore(self.workers)

        async def one(seed: int) -> SeedOutcome:
            async with semaphore:
                return await asyncio.to_thread(self._run_seed, config, seed)

        logger.info("Starting replication", shape=config.shape, n_seeds=count)
        results = await asyncio.gather(*(one(seed) for seed in seeds), return_exceptions=True)

        outcomes: list[SeedOutcome] = []
        failed: dict[int, str] = {}
        for seed, result in zip(seeds, results):
            if isinstance(result, BaseException):
                logger.warning("Seed failed", seed=seed, error=str(result))
                failed[seed] = f"{type(result).__name__}: {result}"
            else:
                outcomes.append(result)

        collected: dict[str, dict[str, list[float]]] = {}
        for outcome in outcomes:
            for name, values in outcome.metrics.items():
                for measure, value in values.items():
                    collected.setdefault(name, {}).setdefault(measure, []).append(value)

        logger.info("Replication completed", succeeded=len(outcomes), failed=len(failed))
        return ReplicationSummary(
            shape=config.shape,
            seeds=seeds,
            failed_seeds=failed,
            outcomes=outcomes,
            metrics={
                name: {measure: _summary(values) for measure, values in by_measure.items()}
                for name, by_measure in collected.items()
            },
            p_frequency=dict(sorted(Counter(o.p for o in outcomes).items())),
            state_count_frequency=dict(sorted(Counter(o.m for o in outcomes).items())),
        )
