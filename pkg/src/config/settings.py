"""
Process-level settings for the detection engine.
Uses pydantic-settings for environment variable management.
"""

from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator


class Settings(BaseSettings):
    """Runtime settings read from ``LOCOV_*`` environment variables."""

    # Application
    app_name: str = "locov"
    app_version: str = "1.0.0"
    app_env: str = Field(default="development")

    # Evaluation parallelism (LOCOV_THREADS)
    threads: int = Field(default=1, ge=1)

    # Logging
    log_level: str = Field(default="INFO")
    logfire_token: Optional[str] = Field(default=None)
    logfire_project: str = Field(default="locov")

    model_config = SettingsConfigDict(
        env_prefix="LOCOV_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    @field_validator("app_env")
    def validate_environment(cls, v):
        """Validate environment value."""
        allowed = ["development", "testing", "production"]
        if v not in allowed:
            raise ValueError(f"app_env must be one of {allowed}")
        return v

    @field_validator("log_level")
    def validate_log_level(cls, v):
        v = v.upper()
        if v not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ValueError(f"unsupported log level {v}")
        return v


# Create singleton instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get settings instance."""
    global _settings

    if _settings is None:
        _settings = Settings()

    return _settings


def reset_settings() -> None:
    """Drop the cached instance so the environment is re-read (tests)."""
    global _settings
    _settings = None


__all__ = ['Settings', 'get_settings', 'reset_settings']
