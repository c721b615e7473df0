"""
Command-line surface: simulate, dus, fit, forecast, evaluate, replicate.

Exit codes: 0 success, 1 statistical stage failure, 2 bad input or usage.
"""
import argparse
import asyncio
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from fse_forecast.config import CaseConfig, load_case_config, settings
from fse_forecast.dependencies import get_evaluation_service
from fse_forecast.errors import EXIT_INPUT, DomainError
from fse_forecast.middleware.command_tracing import run_traced
from fse_forecast.models.series import EventCalendar
from fse_forecast.observability import initialize_observability
from fse_forecast.services.synth_gen import generate, make_company_shaped_spec, to_dataset
from fse_forecast.stores import csv_store, report_writer


def _config(args: argparse.Namespace) -> CaseConfig:
    config = load_case_config(args.config)
    overrides = {
        key: getattr(args, key)
        for key in ("shape", "seed", "n_seeds")
        if getattr(args, key, None) is not None
    }
    return CaseConfig.model_validate({**config.model_dump(), **overrides}) if overrides else config


def _bundle(args: argparse.Namespace):
    return csv_store.load_bundle(args.demand, args.calendar, args.factors, args.forecasts)


def cmd_simulate(args: argparse.Namespace) -> None:
    config = _config(args)
    bundle = generate(make_company_shaped_spec(config.shape, config.seed))
    csv_store.save_bundle(to_dataset(bundle), args.out_dir)
    print(f"shape {config.shape} seed {config.seed}: {len(bundle.demand)} weeks -> {args.out_dir}")


def cmd_dus(args: argparse.Namespace) -> None:
    result = get_evaluation_service().build_states(_bundle(args), _config(args))
    report_writer.write_dus_result(result, args.out_dir)
    print("\n".join(result.audit))


def cmd_fit(args: argparse.Namespace) -> None:
    state_map = report_writer.read_state_map(args.states) if args.states else None
    model = get_evaluation_service().fit_model(_bundle(args), _config(args), state_map)
    report_writer.write_fitted_model(model, Path(args.out_dir) / "model.json")
    print(report_writer.coefficients_frame(model.fit).to_string(index=False))


def cmd_forecast(args: argparse.Namespace) -> None:
    model = report_writer.read_fitted_model(args.model)
    if args.calendar:
        if not args.factors:
            raise DomainError("--calendar needs --factors to validate its levels")
        calendar = csv_store.load_calendar(args.calendar, csv_store.load_factors(args.factors))
    elif args.horizon:
        weeks = csv_store.following_weeks(model.last_week, args.horizon)
        names = model.state_map.factor_names if model.state_map else ()
        calendar = EventCalendar.empty(weeks, names)
    else:
        raise DomainError("forecast needs --calendar or --horizon")

    values = get_evaluation_service().forecast_model(model, calendar)
    report_writer.write_forecast(calendar.weeks, values, Path(args.out_dir) / "forecast.csv")
    print(f"{len(values)} weeks forecast -> {args.out_dir}")


def cmd_evaluate(args: argparse.Namespace) -> None:
    report = get_evaluation_service().run_case(_bundle(args), _config(args))
    report_writer.write_case_report(report, args.out_dir)
    print(report_writer.render_case_report(report), end="")


def cmd_replicate(args: argparse.Namespace) -> None:
    config = _config(args)
    summary = asyncio.run(get_evaluation_service().replicate(config))
    report_writer.write_replication(summary, args.out_dir)
    print(report_writer.replication_frame(summary).to_string(index=False))


def _add_bundle_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--demand", required=True, help="demand.csv (week,demand)")
    parser.add_argument("--calendar", required=True, help="calendar.csv (week,<factors>)")
    parser.add_argument("--factors", required=True, help="factors.csv (factor,level)")
    parser.add_argument("--forecasts", help="forecasts.csv (week,baseline[,adjusted])")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fse-forecast",
        description="Demand forecasting with demand uplift states for systematic events",
    )
    parser.add_argument("--config", help="key = value case configuration file")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="write a synthetic bundle")
    simulate.add_argument("--shape", choices=["A", "B"])
    simulate.add_argument("--seed", type=int)
    simulate.set_defaults(handler=cmd_simulate)

    dus = commands.add_parser("dus", help="build demand uplift states")
    _add_bundle_args(dus)
    dus.set_defaults(handler=cmd_dus)

    fit = commands.add_parser("fit", help="fit the model and save model.json")
    _add_bundle_args(fit)
    fit.add_argument("--states", help="states.json written by the dus command")
    fit.set_defaults(handler=cmd_fit)

    forecast = commands.add_parser("forecast", help="forecast from a saved model")
    forecast.add_argument("--model", required=True, help="model.json written by fit")
    forecast.add_argument("--calendar", help="future calendar.csv")
    forecast.add_argument("--factors", help="factors.csv for the future calendar")
    forecast.add_argument("--horizon", type=int, help="weeks ahead with no events")
    forecast.set_defaults(handler=cmd_forecast)

    evaluate = commands.add_parser("evaluate", help="holdout evaluation report")
    _add_bundle_args(evaluate)
    evaluate.set_defaults(handler=cmd_evaluate)

    replicate = commands.add_parser("replicate", help="Monte Carlo over seeds")
    replicate.add_argument("--shape", choices=["A", "B"])
    replicate.add_argument("--seed", type=int, help="first seed")
    replicate.add_argument("--n-seeds", dest="n_seeds", type=int)
    replicate.set_defaults(handler=cmd_replicate)

    for sub in (simulate, dus, fit, forecast, evaluate, replicate):
        sub.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        sub.add_argument("--out-dir", dest="out_dir", required=True, help="output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0

    initialize_observability(settings)
    handler: Callable[[argparse.Namespace], None] = args.handler
    return run_traced(args.command, lambda: handler(args))


if __name__ == "__main__":
    sys.exit(main())
