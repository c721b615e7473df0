import pytest
from pydantic import BaseModel, ValidationError

from fse_forecast.errors import (
    DeadStateError,
    DusStepError,
    NoSignificantFactorError,
    SchemaError,
    StageError,
)
from fse_forecast.middleware import command_tracing
from fse_forecast.middleware.command_tracing import exit_code_for, run_traced
from fse_forecast.observability import get_run_id


class _Strict(BaseModel):
    value: int


def _validation_error() -> ValidationError:
    try:
        _Strict(value="not a number")
    except ValidationError as exc:
        return exc
    raise AssertionError("validation should have failed")


@pytest.mark.parametrize(
    "exc, code",
    [
        (SchemaError("demand.csv", 3, "demand", "bad"), 2),
        (DeadStateError([5]), 1),
        (StageError("order", DeadStateError([5])), 1),
        (DusStepError(1, NoSignificantFactorError("none")), 1),
        (StageError("load", SchemaError("x.csv", None, None, "bad")), 2),
        (RuntimeError("unexpected"), 1),
    ],
)
def test_exit_code_for(exc, code):
    assert exit_code_for(exc) == code


def test_validation_error_is_input_error():
    assert exit_code_for(_validation_error()) == 2


def test_successful_command(mocker):
    """Test that a command that returns normally exits 0 and logs completion."""
    # Arrange
    logger = mocker.patch.object(command_tracing, "logger")
    handler = mocker.Mock(return_value=None)

    # Act
    code = run_traced("fit", handler)

    # Assert
    assert code == 0
    handler.assert_called_once_with()
    logger.info.assert_any_call("Command started", command="fit")
    assert logger.info.call_args.args == ("Command completed",)


def test_failing_command_reports_exit_code(mocker):
    """Test that a statistical failure maps to exit 1 and is logged once."""
    # Arrange
    logger = mocker.patch.object(command_tracing, "logger")

    def handler():
        raise StageError("order", DeadStateError([6]))

    # Act
    code = run_traced("fit", handler)

    # Assert
    assert code == 1
    logger.error.assert_called_once()
    assert logger.error.call_args.kwargs["exit_code"] == 1
    assert logger.error.call_args.kwargs["error_type"] == "StageError"
    assert logger.error.call_args.kwargs["exc_info"] is False


def test_unexpected_failure_logs_traceback(mocker):
    logger = mocker.patch.object(command_tracing, "logger")

    def handler():
        raise KeyError("boom")

    assert run_traced("evaluate", handler) == 1
    assert logger.error.call_args.kwargs["exc_info"] is True


def test_each_command_gets_a_fresh_run_id(mocker):
    mocker.patch.object(command_tracing, "logger")
    seen = []

    run_traced("dus", lambda: seen.append(get_run_id()))
    run_traced("dus", lambda: seen.append(get_run_id()))

    assert all(seen)
    assert seen[0] != seen[1]
