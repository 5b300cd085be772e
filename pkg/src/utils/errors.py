"""
Exception types for the open-vocabulary detection engine.
Every failure carries a short machine-readable code.
"""

from typing import Optional


class LocovError(ValueError):
    """Base error. ``code`` is one of the documented failure tags."""

    def __init__(self, code: str, message: Optional[str] = None):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class ConfigError(LocovError):
    """Invalid experiment or world configuration (exit status 2)."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        detail = f"{field}: {message}" if field else message
        super().__init__("invalid-config", detail)


class NonFiniteLossError(LocovError):
    """Raised when a training loss turns NaN or infinite."""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        self.dump_path = dump_path
        super().__init__("non-finite-loss", message)


__all__ = ['LocovError', 'ConfigError', 'NonFiniteLossError']
