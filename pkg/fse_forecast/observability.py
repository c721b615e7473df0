"""
OpenTelemetry tracing and structured logging configuration.
"""
import logging
import sys
import uuid
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Optional

import structlog
from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor

from fse_forecast.config import Settings, settings

# Context variable for run tracing
run_id_var: ContextVar[Optional[str]] = ContextVar("run_id", default=None)

_tracer = trace.get_tracer("fse_forecast")


def _parse_pairs(raw: str) -> dict[str, str]:
    pairs = {}
    for item in raw.split(","):
        if "=" in item:
            key, value = item.split("=", 1)
            pairs[key.strip()] = value.strip()
    return pairs


def add_trace_context(logger, method_name, event_dict):
    """Add OpenTelemetry trace context and the run id to log events."""
    span = trace.get_current_span()
    if span:
        span_context = span.get_span_context()
        if span_context.is_valid:
            event_dict["trace_id"] = format(span_context.trace_id, "032x")
            event_dict["span_id"] = format(span_context.span_id, "016x")

    run_id = run_id_var.get()
    if run_id:
        event_dict["run_id"] = run_id

    return event_dict


def setup_opentelemetry(config: Settings = settings) -> None:
    """Initialize OpenTelemetry tracing with an OTLP exporter."""
    if not config.enable_tracing:
        return

    resource_attributes = {
        "service.name": config.otel_service_name,
        "service.version": config.otel_service_version,
        "service.namespace": "forecasting",
    }
    resource_attributes.update(_parse_pairs(config.otel_resource_attributes))

    provider = TracerProvider(resource=Resource.create(resource_attributes))
    exporter = OTLPSpanExporter(
        endpoint=f"{config.otel_exporter_otlp_endpoint}/v1/traces",
        headers=_parse_pairs(config.otel_exporter_otlp_headers),
    )
    provider.add_span_processor(BatchSpanProcessor(exporter))
    trace.set_tracer_provider(provider)


def setup_logging(config: Settings = settings) -> None:
    """Configure structured logging; events go to stderr."""
    level = getattr(logging, config.log_level.upper(), logging.INFO)

    processors = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.TimeStamper(fmt="ISO"),
        add_trace_context,
        structlog.processors.add_log_level,
        structlog.processors.StackInfoRenderer(),
        structlog.dev.set_exc_info,
    ]

    # JSON for machines, pretty console output when debugging
    if config.debug:
        processors.append(structlog.dev.ConsoleRenderer())  # type: ignore
    else:
        processors.append(structlog.processors.JSONRenderer())  # type: ignore

    structlog.configure(
        processors=processors,
        logger_factory=structlog.WriteLoggerFactory(file=sys.stderr),
        wrapper_class=structlog.make_filtering_bound_logger(level),
        cache_logger_on_first_use=True,
    )

    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level)


def get_logger(name: Optional[str] = None):
    """Get a structured logger instance."""
    return structlog.get_logger(name or __name__)


def set_run_id(run_id: Optional[str] = None) -> str:
    """Set the run id in context so every log event of a command carries it."""
    if run_id is None:
        run_id = uuid.uuid4().hex[:12]

    run_id_var.set(run_id)
    structlog.contextvars.bind_contextvars(run_id=run_id)
    return run_id


def get_run_id() -> Optional[str]:
    return run_id_var.get()


@contextmanager
def stage_span(name: str, **attributes) -> Iterator[trace.Span]:
    """Run a pipeline stage inside its own span."""
    with _tracer.start_as_current_span(name) as span:
        for key, value in attributes.items():
            span.set_attribute(key, value)
        yield span


def initialize_observability(config: Settings = settings) -> None:
    """Initialize all observability components."""
    setup_logging(config)
    setup_opentelemetry(config)
