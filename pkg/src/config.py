from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Monitoring Configuration
    log_level: str = Field(default="INFO")
    enable_metrics: bool = Field(default=True)

    # Environment
    environment: str = Field(default="development")

    # Outputs and inputs
    output_root: Path = Field(default=Path("runs"), description="root directory for run artifacts")
    grid_file: Optional[Path] = Field(default=None, description="grid description overriding the bundled case")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"log_level must be a logging level name, got {v!r}")
        return level


settings = Settings()
