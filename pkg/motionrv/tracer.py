import inspect
import json
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Sequence

import opentelemetry
import pandas as pd
from opentelemetry import trace as otel_trace
from opentelemetry.sdk.resources import SERVICE_NAME, Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import (BatchSpanProcessor,
                                            ConsoleSpanExporter,
                                            SimpleSpanProcessor)
from opentelemetry.util._once import Once

from motionrv.config import MotionRvConfig
from motionrv.logger import initialize_logger, shutdown_logger


def tracer_verbose(config: MotionRvConfig, message: str, *args: Any) -> None:
    """Helper function for conditional tracer debugging

    Args:
        config: MotionRvConfig instance
        message: Debug message to output
        *args: Additional arguments to print
    """
    if config.tracer_verbose:
        print(f"[motionrv-tracer] {message}", *args, file=sys.stderr)


# Global state
_tracer_provider: TracerProvider | None = None
_config: MotionRvConfig | None = None


@dataclass
class TraceOptions:
    r"""Options for configuring function tracing"""
    span_name: str | None = None

    # Parameter tracking options
    trace_params: bool | Sequence[str] = False
    trace_return_value: bool = False

    # Attribute handling
    flatten_attributes: bool = True

    def get_span_name(self, fn: Callable) -> str:
        r"""Get the span name for a function"""
        if self.span_name is not None:
            return self.span_name
        return f'{fn.__module__}.{fn.__qualname__}'


def init(config: MotionRvConfig | None = None,
         run_id: str = "no-run",
         command: str = "library") -> TracerProvider:
    r"""Initialize motionrv tracing and logging.

    Re-initializing shuts the previous provider down first, so every CLI
    invocation gets a fresh provider.

    Args:
        config: Pipeline configuration; defaults are used when omitted.
        run_id: Identifier stamped on every log record.
        command: CLI command name stamped on every log record.

    Returns:
        TracerProvider instance
    """
    global _tracer_provider, _config
    config = config or MotionRvConfig()

    if _tracer_provider is not None:
        shutdown()

    tracer_verbose(
        config, "Initializing motionrv with config:", {
            "log_level": config.log_level,
            "enable_span_console_export": config.enable_span_console_export,
            "otlp_endpoint": config.otlp_endpoint,
        })
    initialize_logger(config, run_id=run_id, command=command)

    resource = Resource(attributes={
        SERVICE_NAME: "motionrv",
        "motionrv.run_id": run_id,
        "motionrv.command": command,
        "telemetry.sdk.language": "python",
    })
    provider = TracerProvider(resource=resource)

    if config.enable_span_console_export:
        tracer_verbose(config, "Adding console span processor...")
        provider.add_span_processor(
            SimpleSpanProcessor(ConsoleSpanExporter(out=sys.stderr)))

    if config.otlp_endpoint:
        from opentelemetry.exporter.otlp.proto.http.trace_exporter import \
            OTLPSpanExporter
        tracer_verbose(config, f"Creating OTLP span exporter with endpoint: "
                       f"{config.otlp_endpoint}")
        provider.add_span_processor(
            BatchSpanProcessor(OTLPSpanExporter(
                endpoint=config.otlp_endpoint)))

    # OpenTelemetry only lets the global provider be set once per process
    otel_trace._TRACER_PROVIDER = None
    otel_trace._TRACER_PROVIDER_SET_ONCE = Once()
    otel_trace.set_tracer_provider(provider)
    _tracer_provider = provider
    _config = config
    tracer_verbose(config, "motionrv initialization completed")
    return provider


def shutdown() -> None:
    """Flush spans and detach log handlers."""
    global _tracer_provider, _config
    shutdown_logger()
    if _tracer_provider is not None:
        if _config is not None:
            tracer_verbose(_config, "Shutting down tracing...")
        _tracer_provider.shutdown()
        _tracer_provider = None
        _config = None


def is_initialized() -> bool:
    """Check if tracing has been initialized"""
    return _tracer_provider is not None


@contextmanager
def _trace(function: Callable, options: TraceOptions, *args: Any,
           **kwargs: Any):
    """Internal context manager for tracing function execution"""
    if not is_initialized():
        yield None
        return

    tracer = opentelemetry.trace.get_tracer(__name__)
    with tracer.start_as_current_span(options.get_span_name(function)) as span:
        span.set_attribute("telemetry_sdk_language", "python")
        if options.trace_params:
            parameter_values = _params_to_dict(function, options.trace_params,
                                               *args, **kwargs)
            _store_dict_in_span(parameter_values, span,
                                options.flatten_attributes)
        yield span


def trace(options: TraceOptions = TraceOptions()) -> Callable[..., Any]:
    """
    Decorator for tracing function execution.

    Args:
        options: TraceOptions instance to configure tracing behavior

    Returns:
        Decorated function with tracing enabled

    Example:
        @trace(TraceOptions(trace_params=["scan_id"]))
        def build_windows(roi, motion, rv, arm, spec, scan_id):
            ...
    """

    def _inner_trace(function: Callable) -> Callable:

        @wraps(function)
        def _trace_sync_wrapper(*args: Any, **kwargs: Any) -> Any:
            with _trace(function, options, *args, **kwargs) as span:
                ret = function(*args, **kwargs)
                if options.trace_return_value and span:
                    _store_dict_in_span({"return": ret}, span,
                                        options.flatten_attributes)
                return ret

        return _trace_sync_wrapper

    return _inner_trace


def write_attributes_to_current_span(attributes: dict[str, Any]) -> None:
    """Write custom attributes to the current active span"""
    span = otel_trace.get_current_span()
    if span and span.is_recording():
        _store_dict_in_span(attributes, span, flatten=True)


def _serialize_dict(d: dict[Any, Any]) -> dict[Any, Any]:
    """Round-trip through JSON so every value is a span-safe primitive."""
    data = json.loads(json.dumps(d, default=str))
    return {
        k: v if isinstance(v, (str, bool, int, float)) else json.dumps(v)
        for k, v in data.items()
    }


def _params_to_dict(
    func: Callable,
    params_to_track: bool | Sequence[str],
    *args: Any,
    **kwargs: Any,
) -> dict[str, Any]:
    """Convert function parameters to dictionary for tracing"""
    try:
        bound_arguments = inspect.signature(func).bind(*args, **kwargs)
        bound_arguments.apply_defaults()

        def _should_track_key(key: str) -> bool:
            if key == 'self':
                return False
            if isinstance(params_to_track, bool):
                return params_to_track
            return key in params_to_track

        return {
            f'params.{key}': value
            for key, value in bound_arguments.arguments.items()
            if _should_track_key(key)
        }
    except Exception:
        return {}


def _store_dict_in_span(data: dict[str, Any], span: Any, flatten: bool = True):
    """
    Stores a dictionary in a span (as attributes), optionally flattening it.
    """
    if flatten:
        data = _flatten_dict(data)
    data = {k: v if v is not None else 'None' for k, v in data.items()}
    span.set_attributes(_serialize_dict(data))


def _flatten_dict(data: dict[str, Any], sep: str = "_") -> dict[str, Any]:
    """Flattens a dictionary, joining parent/child keys with `sep`."""
    flattened = pd.json_normalize(data, sep=sep).to_dict(orient="records")
    return flattened[0] if len(flattened) > 0 else {}
