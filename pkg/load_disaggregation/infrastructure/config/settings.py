"""Application configuration using Pydantic Settings."""

import os
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings, read from ``LOAD_DISAGG_*`` variables or ``.env``."""

    model_config = SettingsConfigDict(
        env_prefix="LOAD_DISAGG_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Outputs
    output_dir: Path = Path("outputs")

    # Execution
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    # Logging
    log_level: str = "INFO"
    log_format: str = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"


@lru_cache
def get_settings() -> Settings:
    """Get cached application settings."""
    return Settings()
