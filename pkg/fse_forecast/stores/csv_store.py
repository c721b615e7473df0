"""
CSV schemas for demand, event calendars, forecasts and factor declarations.

  demand.csv     week,demand
  calendar.csv   week,<factor_1>,...,<factor_F>   (all cells empty = no event)
  forecasts.csv  week,baseline[,adjusted]
  factors.csv    factor,level

Weeks are integers or ISO-8601 dates, consistent within a file, one week apart.
Line numbers in errors count the header as line 1.
"""
import math
import os
import tempfile
from collections.abc import Sequence
from datetime import timedelta
from pathlib import Path

import pandas as pd

from fse_forecast.errors import DomainError, MisalignedWeeksError, SchemaError
from fse_forecast.models.dataset import DatasetBundle
from fse_forecast.models.series import DemandSeries, EventCalendar, EventFactor
from fse_forecast.observability import get_logger

logger = get_logger(__name__)

DEMAND_FILE = "demand.csv"
CALENDAR_FILE = "calendar.csv"
FORECASTS_FILE = "forecasts.csv"
FACTORS_FILE = "factors.csv"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _read(path: str | Path, required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(str(path), None, None, "file not found")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(str(path), None, None, f"unreadable CSV: {exc}") from exc
    frame.columns = [str(c).strip() for c in frame.columns]
    for column in required:
        if column not in frame.columns:
            raise SchemaError(str(path), 1, column, "required column missing")
    return frame.apply(lambda col: col.str.strip())


def _parse_weeks(path: str | Path, raw: pd.Series) -> list[str]:
    """Normalise week labels and check they run one week apart."""
    path = str(path)
    if raw.empty:
        raise SchemaError(path, None, "week", "no rows")
    as_int = pd.to_numeric(raw, errors="coerce")
    if as_int.notna().all() and (as_int % 1 == 0).all():
        ints = as_int.astype(int).tolist()
        gaps = [f"{a}->{b}" for a, b in zip(ints, ints[1:]) if b != a + 1]
        if gaps:
            raise MisalignedWeeksError(path, gaps)
        return [str(i) for i in ints]

    dates = pd.to_datetime(raw, format="ISO8601", errors="coerce")
    bad = dates.isna()
    if bad.any():
        line = int(bad.to_numpy().nonzero()[0][0]) + 2
        raise SchemaError(
            path, line, "week", "weeks must all be integers or all ISO-8601 dates"
        )
    labels = [d.date().isoformat() for d in dates]
    gaps = [
        f"{a.date()}->{b.date()}"
        for a, b in zip(dates, dates.iloc[1:])
        if b - a != timedelta(days=7)
    ]
    if gaps:
        raise MisalignedWeeksError(path, gaps)
    return labels


def _to_float(cell: str) -> float:
    if "_" in cell:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        return math.nan


def _parse_numbers(path: str | Path, frame: pd.DataFrame, column: str) -> list[float]:
    """Correctly rounded decimal parse, so written values read back unchanged."""
    values = [_to_float(cell) for cell in frame[column]]
    for row, value in enumerate(values):
        if not math.isfinite(value):
            raise SchemaError(
                str(path), row + 2, column, f"not a finite number: '{frame[column].iloc[row]}'"
            )
    return values


def _check_same_weeks(path: str | Path, weeks: list[str], expected: list[str]) -> None:
    if weeks == expected:
        return
    missing = sorted(set(expected) - set(weeks))
    extra = sorted(set(weeks) - set(expected))
    gaps = [f"missing {w}" for w in missing] + [f"unexpected {w}" for w in extra]
    raise MisalignedWeeksError(str(path), gaps or ["week order differs from demand.csv"])


def load_factors(path: str | Path) -> list[EventFactor]:
    frame = _read(path, ["factor", "level"])
    levels: dict[str, list[str]] = {}
    for i, (factor, level) in enumerate(zip(frame["factor"], frame["level"])):
        if not factor or not level:
            raise SchemaError(str(path), i + 2, "level" if factor else "factor", "empty cell")
        if level in levels.setdefault(factor, []):
            raise SchemaError(str(path), i + 2, "level", f"duplicate level '{level}'")
        levels[factor].append(level)
    return [EventFactor(name=name, levels=tuple(values)) for name, values in levels.items()]


def load_demand(path: str | Path) -> DemandSeries:
    frame = _read(path, ["week", "demand"])
    weeks = _parse_weeks(path, frame["week"])
    return DemandSeries(weeks=weeks, values=_parse_numbers(path, frame, "demand"))


def load_calendar(path: str | Path, factors: Sequence[EventFactor]) -> EventCalendar:
    frame = _read(path, ["week"])
    weeks = _parse_weeks(path, frame["week"])
    declared = {factor.name: set(factor.levels) for factor in factors}
    names = [c for c in frame.columns if c != "week"]
    for name in names:
        if name not in declared:
            raise SchemaError(str(path), 1, name, "factor not declared in factors.csv")

    events: list[dict[str, str] | None] = []
    for i, row in enumerate(frame[names].itertuples(index=False, name=None)):
        filled = [bool(cell) for cell in row]
        if not any(filled):
            events.append(None)
            continue
        if not all(filled):
            column = names[filled.index(False)]
            raise SchemaError(str(path), i + 2, column, "partial event row")
        for name, level in zip(names, row):
            if level not in declared[name]:
                raise SchemaError(str(path), i + 2, name, f"undeclared level '{level}'")
        events.append(dict(zip(names, row)))
    return EventCalendar(weeks=weeks, factor_names=tuple(sorted(names)), events=events)


def load_forecasts(
    path: str | Path, expected_weeks: list[str]
) -> tuple[list[float], list[float] | None]:
    frame = _read(path, ["week", "baseline"])
    _check_same_weeks(path, _parse_weeks(path, frame["week"]), expected_weeks)
    baseline = _parse_numbers(path, frame, "baseline")
    adjusted = (
        _parse_numbers(path, frame, "adjusted") if "adjusted" in frame.columns else None
    )
    return baseline, adjusted


def load_bundle(
    demand_path: str | Path,
    calendar_path: str | Path,
    factors_path: str | Path,
    forecasts_path: str | Path | None = None,
) -> DatasetBundle:
    factors = load_factors(factors_path)
    demand = load_demand(demand_path)
    calendar = load_calendar(calendar_path, factors)
    _check_same_weeks(calendar_path, calendar.weeks, demand.weeks)

    baseline = adjusted = None
    if forecasts_path is not None:
        baseline, adjusted = load_forecasts(forecasts_path, demand.weeks)

    logger.info(
        "Bundle loaded",
        n_weeks=len(demand),
        event_weeks=len(calendar.event_weeks()),
        factors=[f.name for f in factors],
    )
    return DatasetBundle(
        demand=demand,
        calendar=calendar,
        factor_declarations=factors,
        baseline_forecasts=baseline,
        adjusted_forecasts=adjusted,
    )


def load_bundle_dir(directory: str | Path) -> DatasetBundle:
    directory = Path(directory)
    forecasts = directory / FORECASTS_FILE
    return load_bundle(
        directory / DEMAND_FILE,
        directory / CALENDAR_FILE,
        directory / FACTORS_FILE,
        forecasts if forecasts.is_file() else None,
    )


def calendar_frame(calendar: EventCalendar) -> pd.DataFrame:
    frame = pd.DataFrame({"week": calendar.weeks})
    for name in calendar.factor_names:
        frame[name] = [event[name] if event else "" for event in calendar.events]
    return frame


def bundle_frames(bundle: DatasetBundle) -> dict[str, pd.DataFrame]:
    frames = {
        DEMAND_FILE: pd.DataFrame({"week": bundle.demand.weeks, "demand": bundle.demand.values}),
        CALENDAR_FILE: calendar_frame(bundle.calendar),
        FACTORS_FILE: pd.DataFrame(
            [(f.name, level) for f in bundle.factor_declarations for level in f.levels],
            columns=["factor", "level"],
        ),
    }
    if bundle.baseline_forecasts is not None:
        forecasts = pd.DataFrame(
            {"week": bundle.demand.weeks, "baseline": bundle.baseline_forecasts}
        )
        if bundle.adjusted_forecasts is not None:
            forecasts["adjusted"] = bundle.adjusted_forecasts
        frames[FORECASTS_FILE] = forecasts
    elif bundle.adjusted_forecasts is not None:
        raise DomainError("adjusted forecasts can only be saved next to a baseline column")
    return frames


def save_bundle(bundle: DatasetBundle, directory: str | Path) -> list[Path]:
    """Write the bundle's CSV files; every file is rendered before any is written."""
    directory = Path(directory)
    rendered = {
        directory / name: frame.to_csv(index=False, lineterminator="\n")
        for name, frame in bundle_frames(bundle).items()
    }
    for path, text in rendered.items():
        atomic_write_text(path, text)
    logger.info("Bundle saved", directory=str(directory), files=len(rendered))
    return list(rendered)


def following_weeks(last_week: str, horizon: int) -> list[str]:
    """Labels of the ``horizon`` weeks after ``last_week``, in its own format."""
    if horizon < 1:
        raise DomainError(f"horizon must be at least 1, got {horizon}")
    if last_week.lstrip("-").isdigit():
        start = int(last_week)
        return [str(start + i) for i in range(1, horizon + 1)]
    first = pd.Timestamp(last_week)
    return [(first + timedelta(days=7 * i)).date().isoformat() for i in range(1, horizon + 1)]
