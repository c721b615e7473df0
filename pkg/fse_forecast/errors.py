"""Exception hierarchy shared by every service.

Each error carries an ``exit_code``: 2 for bad input or parameters, 1 for a
statistical stage that cannot proceed on valid input.
"""

from collections.abc import Sequence

EXIT_STATISTICAL = 1
EXIT_INPUT = 2


class ForecastingError(Exception):
    exit_code: int = EXIT_STATISTICAL


class InputError(ForecastingError, ValueError):
    exit_code = EXIT_INPUT


class StatisticalError(ForecastingError):
    exit_code = EXIT_STATISTICAL


class DomainError(InputError):
    """A parameter lies outside the domain an operation accepts."""


class ConfigError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class SchemaError(InputError):
    def __init__(
        self, file: str, line: int | None, column: str | None, message: str
    ) -> None:
        self.file = file
        self.line = line
        self.column = column
        location = file
        if line is not None:
            location += f", line {line}"
        if column is not None:
            location += f", column '{column}'"
        super().__init__(f"{location}: {message}")


class MisalignedWeeksError(InputError):
    def __init__(self, file: str, gaps: Sequence[str]) -> None:
        self.file = file
        self.gaps = list(gaps)
        super().__init__(f"{file}: week index is not aligned: {', '.join(self.gaps)}")


class MissingBaselineError(InputError):
    def __init__(self, weeks: Sequence[str]) -> None:
        self.weeks = list(weeks)
        super().__init__(f"baseline forecast missing on event week(s) {self.weeks}")


class UnindexedCombinationError(InputError):
    def __init__(self, week: str, combination: str) -> None:
        self.week = week
        self.combination = combination
        super().__init__(
            f"week {week}: combination {combination} is not indexed in the state "
            "map; assign it to a state first"
        )


class DegenerateInputError(StatisticalError):
    pass


class RankDeficientError(StatisticalError):
    def __init__(self, columns: Sequence[str]) -> None:
        self.columns = list(columns)
        super().__init__(f"design is rank deficient; collinear columns: {self.columns}")


class DeadStateError(StatisticalError):
    def __init__(self, states: Sequence[int]) -> None:
        self.states = list(states)
        super().__init__(
            f"state column(s) {self.states} never active in the estimation window"
        )


class NonStationaryError(StatisticalError):
    pass


class NonStationarySpecError(InputError):
    def __init__(self, root_moduli: Sequence[float]) -> None:
        self.root_moduli = list(root_moduli)
        super().__init__(
            "AR polynomial has roots on or inside the unit circle: moduli "
            f"{[round(r, 6) for r in self.root_moduli]}"
        )


class NoTestableFactorError(StatisticalError):
    pass


class NoSignificantFactorError(StatisticalError):
    pass


class DusStepError(ForecastingError):
    """An error raised inside one step of the uplift-state construction."""

    def __init__(self, step: int, cause: ForecastingError) -> None:
        self.step = step
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"DUS step {step}: {cause}")


class StageError(ForecastingError):
    """An error raised inside one stage of the evaluation pipeline."""

    def __init__(self, stage: str, cause: ForecastingError) -> None:
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"stage '{stage}' failed: {cause}")
