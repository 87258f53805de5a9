from pathlib import Path
from functools import lru_cache
from typing import ClassVar

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

PACKAGE_ROOT = Path(__file__).resolve().parents[1]


class Settings(BaseSettings):
    """Toolkit settings; only the default worker count comes from the environment."""

    # Application settings
    app_name: ClassVar[str] = "Invariant Manifold Toolkit"
    version: ClassVar[str] = "1.0.0"
    log_level: ClassVar[str] = "INFO"
    log_format: ClassVar[str] = "json"

    # Presets shipped with the package; results depend on them
    presets_path: ClassVar[Path] = PACKAGE_ROOT / "presets.toml"

    # Artifact formatting
    report_indent: ClassVar[int] = 2
    csv_float_format: ClassVar[str] = "%.17g"

    # Worker pool
    default_jobs: int = Field(default=1, ge=1)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="MANIFOLD_",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache()
def get_settings():
    return Settings()


# Global instance
settings = get_settings()
