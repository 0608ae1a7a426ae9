"""Toolkit configuration management using Pydantic settings."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def _split_csv(value: Optional[str]) -> List[str]:
    if not value:
        return []
    return [item.strip() for item in value.split(",") if item.strip()]


class Settings(BaseSettings):
    """Centralised toolkit settings."""

    model_config = SettingsConfigDict(
        env_file=(".env",), env_file_encoding="utf-8", case_sensitive=False, extra="ignore"
    )

    environment: str = Field(default="development", alias="MODSPACE_ENV")

    data_dir: Path = Field(default=Path("data"), alias="MODSPACE_DATA_DIR")
    database_url: Optional[str] = Field(default=None, alias="MODSPACE_DATABASE_URL")

    log_json: bool = Field(default=True, alias="MODSPACE_LOG_JSON")
    log_level: str = Field(default="INFO", alias="MODSPACE_LOG_LEVEL")

    allowed_origins: List[str] = Field(default_factory=list, alias="MODSPACE_ALLOWED_ORIGINS")
    api_keys: List[str] = Field(default_factory=list, alias="MODSPACE_API_KEYS")

    threads: int = Field(default=4, alias="MODSPACE_THREADS", ge=1, le=256)
    record_runs: bool = Field(default=True, alias="MODSPACE_RECORD_RUNS")

    grid_n: int = Field(default=1, alias="MODSPACE_GRID_N", ge=1, le=2)
    grid_L: float = Field(default=32.0, alias="MODSPACE_GRID_L", gt=0)
    grid_N: int = Field(default=4096, alias="MODSPACE_GRID_N_SAMPLES", ge=16)
    k_max: int = Field(default=48, alias="MODSPACE_K_MAX", ge=1)
    tail_tol: float = Field(default=1e-8, alias="MODSPACE_TAIL_TOL", gt=0)
    p: float = Field(default=2.0, alias="MODSPACE_P", ge=1)
    q: float = Field(default=1.0, alias="MODSPACE_Q", ge=1)

    theta: float = Field(default=2.0, alias="MODSPACE_THETA", gt=1)
    probe_max: float = Field(default=1e6, alias="MODSPACE_PROBE_MAX", ge=1e4)

    @field_validator("allowed_origins", "api_keys", mode="before")
    @classmethod
    def _parse_csv(cls, value: Iterable[str] | str | None) -> List[str]:
        if value is None:
            return []
        if isinstance(value, str):
            return _split_csv(value)
        return [item for item in value if item]

    @property
    def sqlite_path(self) -> Path:
        return self.data_dir / "ledger.sqlite"

    @property
    def reports_dir(self) -> Path:
        return self.data_dir / "reports"

    @property
    def resolved_database_url(self) -> str:
        if self.database_url:
            return self.database_url
        sqlite_path = self.sqlite_path
        sqlite_path.parent.mkdir(parents=True, exist_ok=True)
        return f"sqlite:///{sqlite_path.as_posix()}"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    settings = Settings()
    settings.data_dir.mkdir(parents=True, exist_ok=True)
    return settings
