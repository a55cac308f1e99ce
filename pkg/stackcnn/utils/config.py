from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import yaml
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from stackcnn.utils.errors import ConfigError


class Settings(BaseSettings):
    # Defaults for every run; each value can come from the environment
    # (STACKCNN_DT_US=40000) or from a .env file in the working directory.
    LOG_LEVEL: str = Field("INFO")
    DT_US: int = Field(80_000, gt=0)
    N_FRAMES: int = Field(16, ge=2)
    STRIDE: int = Field(1, ge=1)
    MAX_DISPLACEMENT: float = Field(1.0, gt=0)
    DOWNSAMPLE: int = Field(1, ge=1)
    CNN_THRESHOLD: float = Field(0.5, ge=0.0, le=1.0)
    MF_THRESHOLD: float = Field(5.0)
    EXCLUSION_RADIUS: int = Field(3, ge=0)
    MERGE_RADIUS: int = Field(3, ge=0)
    THREADS: int = Field(1, ge=1)

    model_config = SettingsConfigDict(
        env_prefix="STACKCNN_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()


settings = get_settings()


def load_yaml(path: str | Path) -> dict:
    """Read a run-config YAML file into a mapping (empty file -> {})."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return raw


__all__ = ["Settings", "settings", "get_settings", "load_yaml"]
