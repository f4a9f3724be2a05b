import logging
import sys
import time
from typing import Any

from opentelemetry.trace import get_current_span

from motionrv.config import MotionRvConfig

ROOT_LOGGER_NAME = "motionrv"


def log_verbose(config: MotionRvConfig, message: str, *args: Any) -> None:
    """Helper function for conditional verbose logging (logger debugging)

    Args:
        config: MotionRvConfig instance
        message: Log message to output
        *args: Additional arguments to print
    """
    if config.logger_verbose:
        print(f"[motionrv-logger] {message}", *args, file=sys.stderr)


class RunContextFilter(logging.Filter):
    """Filter to add run context and trace/span IDs to log records"""

    def __init__(self, run_id: str = "no-run", command: str = "library"):
        super().__init__()
        self.run_id = run_id
        self.command = command

    def filter(self, record: logging.LogRecord) -> bool:
        """Add run and trace correlation data to log record"""
        ctx = get_current_span().get_span_context()
        if ctx and ctx.trace_id != 0:
            record.trace_id = format(ctx.trace_id, "032x")
            record.span_id = format(ctx.span_id, "016x")
        else:
            record.trace_id = "no-trace"
            record.span_id = "no-span"
        record.run_id = self.run_id
        record.command = self.command
        return True


class SpanEventHandler(logging.Handler):
    """Handler that adds log messages as events to the
    current OpenTelemetry span
    """

    def emit(self, record: logging.LogRecord):
        """Add log record as an event to the current span"""
        try:
            span = get_current_span()
            if span and span.is_recording():
                attributes = {
                    "log.level": record.levelname,
                    "log.logger": record.name,
                    "log.message": record.getMessage(),
                    "log.function": record.funcName,
                    "log.lineno": record.lineno,
                }
                if hasattr(record, "run_id"):
                    attributes["log.run_id"] = record.run_id
                if record.exc_info:
                    attributes["log.exception"] = self.formatException(
                        record.exc_info)
                span.add_event(name=f"log.{record.levelname.lower()}",
                               attributes=attributes,
                               timestamp=int(record.created * 1_000_000_000))
        except Exception:
            # Span bookkeeping must never break the pipeline
            pass


class MotionRvLogger:
    """Logger with run context and span correlation"""

    def __init__(self, name: str | None = None):
        if name is None or name == ROOT_LOGGER_NAME:
            self.logger = logging.getLogger(ROOT_LOGGER_NAME)
        elif name.startswith(ROOT_LOGGER_NAME + "."):
            self.logger = logging.getLogger(name)
        else:
            self.logger = logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")

    def _increment_span_log_count(self, attribute_name: str):
        """Increment the log count attribute for the current span"""
        try:
            span = get_current_span()
            if span and span.is_recording():
                current_count = span.attributes.get(attribute_name, 0)
                span.set_attribute(attribute_name, current_count + 1)
        except Exception:
            pass

    def debug(self, message: str, *args, **kwargs):
        """Log debug message"""
        self.logger.debug(message, *args, **kwargs)

    def info(self, message: str, *args, **kwargs):
        """Log info message"""
        self.logger.info(message, *args, **kwargs)

    def warning(self, message: str, *args, **kwargs):
        """Log warning message"""
        self.logger.warning(message, *args, **kwargs)
        self._increment_span_log_count("num_warning_logs")

    def error(self, message: str, *args, **kwargs):
        """Log error message"""
        self.logger.error(message, *args, **kwargs)
        self._increment_span_log_count("num_error_logs")

    def critical(self, message: str, *args, **kwargs):
        """Log critical message"""
        self.logger.critical(message, *args, **kwargs)
        self._increment_span_log_count("num_critical_logs")


# Handlers installed on the package root logger by initialize_logger
_installed_handlers: list[logging.Handler] = []
_context_filter: RunContextFilter | None = None


def initialize_logger(config: MotionRvConfig,
                      run_id: str = "no-run",
                      command: str = "library") -> MotionRvLogger:
    """Install console and span-event handlers on the package logger.

    Calling it again replaces the previous handlers, so a CLI run and the
    tests can re-initialize freely.
    """
    global _context_filter
    log_verbose(config, f"Initializing logger at level {config.log_level}")
    shutdown_logger()

    root = logging.getLogger(ROOT_LOGGER_NAME)
    root.setLevel(config.log_level)
    root.propagate = False

    logging.Formatter.converter = time.gmtime
    formatter = logging.Formatter(
        "%(asctime)s;%(levelname)s;%(run_id)s;%(command)s;%(name)s;"
        "%(trace_id)s;%(span_id)s;%(message)s")
    _context_filter = RunContextFilter(run_id=run_id, command=command)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(_context_filter)

    span_event_handler = SpanEventHandler()
    span_event_handler.setLevel(logging.DEBUG)
    span_event_handler.addFilter(_context_filter)

    for handler in (console_handler, span_event_handler):
        root.addHandler(handler)
        _installed_handlers.append(handler)

    log_verbose(config, "Logger initialization completed")
    return MotionRvLogger()


def shutdown_logger() -> None:
    """Flush and detach the handlers installed by initialize_logger."""
    global _context_filter
    root = logging.getLogger(ROOT_LOGGER_NAME)
    for handler in _installed_handlers:
        try:
            handler.flush()
            handler.close()
        except Exception:
            pass
        root.removeHandler(handler)
    _installed_handlers.clear()
    _context_filter = None


def get_logger(name: str | None = None) -> MotionRvLogger:
    """Get a logger under the ``motionrv`` namespace.

    Works before initialize_logger; records then follow the standard
    logging fallbacks until handlers are installed.
    """
    return MotionRvLogger(name)
