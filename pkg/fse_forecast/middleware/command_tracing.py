"""
Command tracing for OpenTelemetry and structured logging.
"""
import time
from collections.abc import Callable

from opentelemetry import trace
from pydantic import ValidationError

from fse_forecast.errors import EXIT_INPUT, EXIT_STATISTICAL, ForecastingError
from fse_forecast.observability import get_logger, set_run_id

logger = get_logger(__name__)

EXIT_OK = 0


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ForecastingError):
        return exc.exit_code
    if isinstance(exc, ValidationError):
        return EXIT_INPUT
    return EXIT_STATISTICAL


def run_traced(command: str, handler: Callable[[], None]) -> int:
    """
    Run one command with a fresh run id inside its own span.

    Returns the process exit code: 0 on success, 2 for bad input, 1 for a
    statistical stage that could not proceed or any unexpected failure.
    """
    run_id = set_run_id()
    start_time = time.time()
    tracer = trace.get_tracer(__name__)

    with tracer.start_as_current_span(f"command {command}") as span:
        span.set_attribute("command.name", command)
        span.set_attribute("run.id", run_id)
        logger.info("Command started", command=command)

        try:
            handler()
        except Exception as e:
            duration = time.time() - start_time
            code = exit_code_for(e)

            span.set_attribute("command.exit_code", code)
            span.record_exception(e)
            span.set_status(trace.Status(trace.StatusCode.ERROR, str(e)))

            logger.error(
                "Command failed",
                command=command,
                exit_code=code,
                error=str(e),
                error_type=type(e).__name__,
                duration_ms=round(duration * 1000, 2),
                exc_info=not isinstance(e, (ForecastingError, ValidationError)),
            )
            return code

        duration = time.time() - start_time
        span.set_attribute("command.exit_code", EXIT_OK)
        logger.info(
            "Command completed",
            command=command,
            duration_ms=round(duration * 1000, 2),
        )
        return EXIT_OK
