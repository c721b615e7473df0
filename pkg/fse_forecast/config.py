from pathlib import Path
from typing import Literal

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from fse_forecast.errors import ConfigError


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="FSE_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    debug: bool = Field(default=False, description="Debug mode (console log renderer)")

    # Logging settings
    log_level: str = Field(default="INFO", description="Logging level")

    # Replication settings
    replicate_workers: int = Field(
        default=4, ge=1, description="Concurrent seeds during replication"
    )

    # OpenTelemetry settings
    otel_service_name: str = Field(
        default="fse-forecast", description="OpenTelemetry service name"
    )
    otel_service_version: str = Field(
        default="0.1.0", description="OpenTelemetry service version"
    )
    otel_exporter_otlp_endpoint: str = Field(
        default="http://localhost:4318", description="OTLP exporter endpoint"
    )
    otel_exporter_otlp_headers: str = Field(
        default="", description="OTLP exporter headers (key1=value1,key2=value2)"
    )
    otel_resource_attributes: str = Field(
        default="", description="Additional resource attributes"
    )
    enable_tracing: bool = Field(
        default=False, description="Enable OpenTelemetry tracing"
    )


settings = Settings()


class CaseConfig(BaseModel):
    """Evaluation settings for one case; read from a ``key = value`` file."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    train_length: int | None = Field(
        default=None, ge=1, description="Training weeks; default is n - holdout_length"
    )
    holdout_length: int = Field(default=20, ge=1, description="Test-set weeks")
    p_max: int = Field(default=8, ge=0, description="Largest AR order considered")
    alpha: float = Field(
        default=0.05, gt=0.0, lt=1.0, description="ANOVA factor-screen level"
    )
    merge_alpha: float = Field(
        default=0.05, gt=0.0, lt=1.0, description="Welch merge-test level"
    )
    fallback_rel_tol: float = Field(
        default=0.15, ge=0.0, description="Relative mean tolerance for tiny groups"
    )
    max_diff: int = Field(default=1, ge=0, description="Maximum lag-1 differences")
    difference_policy: Literal["test", "off"] = "test"
    forecast_mode: Literal["recursive", "rolling"] = "recursive"
    msae_variant: Literal["ratio_of_sums", "paper_literal"] = "ratio_of_sums"
    mape_zero_policy: Literal["exclude", "error"] = "exclude"
    seed: int = Field(default=0, ge=0, description="First generator seed")
    shape: Literal["A", "B"] = "A"
    n_seeds: int = Field(default=1, ge=1, description="Seeds for replication")

    @model_validator(mode="after")
    def _check_split(self) -> "CaseConfig":
        if self.train_length is not None and self.train_length <= self.p_max:
            raise ValueError("train_length must exceed p_max")
        return self

    def resolve_train_length(self, n_weeks: int) -> int:
        train = (
            self.train_length
            if self.train_length is not None
            else n_weeks - self.holdout_length
        )
        if not 0 < train < n_weeks:
            raise ConfigError(
                f"train_length {train} must lie strictly inside a {n_weeks}-week series"
            )
        return train


def load_case_config(path: str | Path | None) -> CaseConfig:
    """Parse a plain-text ``key = value`` case file into a validated config."""
    if path is None:
        return CaseConfig()

    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")

    raw = {
        key: value
        for key, value in dotenv_values(path).items()
        if value not in (None, "")
    }
    try:
        return CaseConfig.model_validate(raw)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or 'config'}: {err['msg']}"
            for err in exc.errors()
        )
        raise ConfigError(f"{path}: {problems}") from exc
