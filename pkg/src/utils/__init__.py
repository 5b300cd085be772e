"""
Utilities module for the detection engine.
Provides errors, validation guards and structured logging.
"""

from .errors import LocovError, ConfigError, NonFiniteLossError
from .validators import (
    require_nonempty, require_same_length, require_shape, require_square,
    require_finite, require_unit_interval
)
from .logger import (
    logger, engine_logger, train_logger, eval_logger, storage_logger,
    log_training_step, log_evaluation, log_gradcheck, log_error,
    log_execution_time, set_run_id, set_stage, set_command, clear_context
)

__all__ = [
    # Errors
    'LocovError', 'ConfigError', 'NonFiniteLossError',

    # Validators
    'require_nonempty', 'require_same_length', 'require_shape', 'require_square',
    'require_finite', 'require_unit_interval',

    # Logger
    'logger', 'engine_logger', 'train_logger', 'eval_logger', 'storage_logger',
    'log_training_step', 'log_evaluation', 'log_gradcheck', 'log_error',
    'log_execution_time', 'set_run_id', 'set_stage', 'set_command', 'clear_context'
]
