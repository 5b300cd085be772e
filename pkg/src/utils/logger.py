"""
Logging configuration using LogFire for the detection engine.
Provides structured logging for training, evaluation and gradient checks.
"""

import traceback
from typing import Dict, Any, Optional
from datetime import datetime, timezone
from contextvars import ContextVar
from functools import wraps
import time

# Load environment variables from .env file BEFORE using them
from dotenv import load_dotenv
load_dotenv()

from ..config.settings import get_settings

_settings = get_settings()

# Optional import - logfire for observability
try:
    import logfire
    LOGFIRE_AVAILABLE = True
except ImportError:
    LOGFIRE_AVAILABLE = False
    import logging
    logging.basicConfig(level=_settings.log_level)

from pydantic import BaseModel, Field


# Context variables for run tracking
run_id_var: ContextVar[Optional[str]] = ContextVar('run_id', default=None)
stage_var: ContextVar[Optional[str]] = ContextVar('stage', default=None)
command_var: ContextVar[Optional[str]] = ContextVar('command', default=None)


# Configuration (LOCOV_* via Settings)
LOGFIRE_TOKEN = _settings.logfire_token
LOGFIRE_PROJECT = _settings.logfire_project
APP_ENV = _settings.app_env


# Initialize LogFire or fallback logger
if LOGFIRE_AVAILABLE:
    if LOGFIRE_TOKEN:
        logfire.configure(
            token=LOGFIRE_TOKEN,
            environment=APP_ENV,
            console=None if APP_ENV == "development" else False,
            service_name=LOGFIRE_PROJECT
        )
    else:
        logfire.configure(
            send_to_logfire=False,
            console=None if APP_ENV == "development" else False,
            service_name=LOGFIRE_PROJECT
        )
else:
    class _StdlibLogfire:
        """Converts logfire-style keyword calls to standard logging."""

        def __init__(self):
            self._logger = logging.getLogger("locov")

        def _format_message(self, message, kwargs):
            kwargs.pop("exc_info", None)
            if kwargs:
                extra = " - " + ", ".join(f"{k}={v}" for k, v in kwargs.items())
                return f"{message}{extra}"
            return message

        def info(self, message, **kwargs):
            self._logger.info(self._format_message(message, kwargs))

        def debug(self, message, **kwargs):
            self._logger.debug(self._format_message(message, kwargs))

        def warning(self, message, **kwargs):
            self._logger.warning(self._format_message(message, kwargs))

        def error(self, message, **kwargs):
            exc_info = kwargs.get("exc_info", False)
            self._logger.error(self._format_message(message, kwargs), exc_info=exc_info)

        warn = warning

        def __repr__(self):
            return f"<_StdlibLogfire wrapping {self._logger.name}>"

    logfire = _StdlibLogfire()


# Logger handles per concern (logfire has no get_logger; handles share one sink)
logger = logfire
engine_logger = logfire
train_logger = logfire
eval_logger = logfire
storage_logger = logfire


# Structured log models
class LogContext(BaseModel):
    """Standard context for all log entries."""
    run_id: Optional[str] = None
    stage: Optional[str] = None
    command: Optional[str] = None
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    environment: str = APP_ENV

    def __init__(self, **data):
        super().__init__(**data)
        # Auto-populate from context vars if not provided
        if self.run_id is None:
            self.run_id = run_id_var.get()
        if self.stage is None:
            self.stage = stage_var.get()
        if self.command is None:
            self.command = command_var.get()


class TrainingStepLog(BaseModel):
    """One optimisation step."""
    stage: str
    step: int
    lr: float
    loss_total: float
    components: Dict[str, float] = Field(default_factory=dict)


class EvaluationLog(BaseModel):
    """Summary of one evaluation setup."""
    setup: str
    num_detections: int
    num_ground_truths: int
    ap: float
    ap50: float
    ap75: float


class GradCheckLog(BaseModel):
    """Outcome of one finite-difference comparison."""
    check: str
    group: str
    max_rel_error: float
    passed: bool


# Logging functions
def get_context() -> LogContext:
    """Get current logging context."""
    return LogContext()


def log_training_step(
    stage: str,
    step: int,
    lr: float,
    loss_total: float,
    components: Optional[Dict[str, float]] = None
):
    """Log a training step at debug level."""
    record = TrainingStepLog(
        stage=stage, step=step, lr=lr, loss_total=loss_total,
        components=components or {}
    )
    train_logger.debug(
        f"Step {stage}:{step}",
        context=get_context().model_dump(mode="json"),
        step=record.model_dump()
    )


def log_evaluation(
    setup: str,
    num_detections: int,
    num_ground_truths: int,
    ap: float,
    ap50: float,
    ap75: float
):
    """Log an evaluation block."""
    record = EvaluationLog(
        setup=setup, num_detections=num_detections,
        num_ground_truths=num_ground_truths, ap=ap, ap50=ap50, ap75=ap75
    )
    eval_logger.info(
        f"Evaluation: {setup} AP={ap:.4f} AP50={ap50:.4f}",
        context=get_context().model_dump(mode="json"),
        evaluation=record.model_dump()
    )


def log_gradcheck(check: str, group: str, max_rel_error: float, passed: bool):
    """Log one gradient check."""
    record = GradCheckLog(check=check, group=group, max_rel_error=max_rel_error, passed=passed)
    level = "info" if passed else "error"
    getattr(engine_logger, level)(
        f"Gradcheck {check}/{group}: {'pass' if passed else 'FAIL'}",
        context=get_context().model_dump(mode="json"),
        gradcheck=record.model_dump()
    )


class ErrorLog(BaseModel):
    """A failure as reported to the log stream."""
    kind: str
    error_class: str
    code: Optional[str] = None
    message: str
    details: Dict[str, Any] = Field(default_factory=dict)


def log_error(
    error: Exception,
    kind: str = "runtime",
    details: Optional[Dict[str, Any]] = None
):
    """Log a failure with its machine-readable code and the run context."""
    record = ErrorLog(
        kind=kind,
        error_class=type(error).__name__,
        code=getattr(error, "code", None),
        message=str(error),
        details=details or {}
    )
    logger.error(
        f"{kind} failure [{record.code or record.error_class}]",
        context=get_context().model_dump(mode="json"),
        error=record.model_dump(),
        traceback=traceback.format_exc()
    )


# Decorators
def log_execution_time(func_name: Optional[str] = None):
    """Time a workflow; failures are logged with the elapsed seconds and re-raised."""
    def decorator(func):
        name = func_name or f"{func.__module__}.{func.__name__}"

        @wraps(func)
        def wrapper(*args, **kwargs):
            started = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except Exception as exc:
                engine_logger.error(
                    f"{name} aborted",
                    context=get_context().model_dump(mode="json"),
                    seconds=round(time.perf_counter() - started, 3),
                    code=getattr(exc, "code", None)
                )
                raise
            engine_logger.info(
                f"{name} done",
                context=get_context().model_dump(mode="json"),
                seconds=round(time.perf_counter() - started, 3)
            )
            return result

        return wrapper

    return decorator


# Utility functions
def set_run_id(run_id: str):
    """Set the current run ID."""
    run_id_var.set(run_id)


def set_stage(stage: Optional[str]):
    """Set the current training stage (LSM / STT)."""
    stage_var.set(stage)


def set_command(command: str):
    """Set the current CLI command."""
    command_var.set(command)


def clear_context():
    """Clear all context variables."""
    run_id_var.set(None)
    stage_var.set(None)
    command_var.set(None)


# Export main components
__all__ = [
    'logger',
    'engine_logger',
    'train_logger',
    'eval_logger',
    'storage_logger',
    'log_training_step',
    'log_evaluation',
    'log_gradcheck',
    'log_error',
    'log_execution_time',
    'set_run_id',
    'set_stage',
    'set_command',
    'clear_context'
]
