"""
Constants, environment variable names and built-in model profiles for the s3ap toolkit.
"""

import logging
import os
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

logger = logging.getLogger(__name__)

VERSION = "0.4.1"

ENV_API_KEY = "S3AP_API_KEY"
ENV_BASE_URL = "S3AP_BASE_URL"
ENV_CACHE_DIR = "S3AP_CACHE_DIR"
ENV_CONFIG = "S3AP_CONFIG"
ENV_LIVE = "S3AP_LIVE"

DEFAULT_BASE_URL = "https://api.openai.com/v1"
TOGETHER_BASE_URL = "https://api.together.xyz/v1"
DEFAULT_CACHE_DIR = Path(".s3ap-cache")
DEFAULT_PARALLELISM = 4
DEFAULT_MAX_RETRIES = 2


class ConfigError(Exception):
    """Raised when the configuration file or environment is unusable."""

    def __init__(self, message, config_path=None):
        super().__init__(message)
        self.config_path = config_path

    def __str__(self):
        return f"{self.args[0]} (Config file: {self.config_path})"


class BackendProfile(BaseModel):
    """One chat-completion endpoint a backend can be built from."""

    model_id: str
    base_url: Optional[str] = None
    api_key_env: str = ENV_API_KEY
    reasoning: bool = False
    json_mode: bool = False
    max_concurrency: int = Field(default=4, ge=1)
    timeout: float = Field(default=120.0, gt=0)
    max_retries: int = Field(default=3, ge=0)

    @field_validator("model_id")
    @classmethod
    def check_model_id(cls, v):
        if not v.strip():
            raise ValueError("model_id must not be empty")
        return v.strip()


def _openai(model_id: str, reasoning: bool = False) -> BackendProfile:
    return BackendProfile(model_id=model_id, reasoning=reasoning, json_mode=True)


def _together(model_id: str, reasoning: bool = False) -> BackendProfile:
    return BackendProfile(
        model_id=model_id.removeprefix("together_ai/"),
        base_url=TOGETHER_BASE_URL,
        reasoning=reasoning,
    )


BUILTIN_PROFILES: dict[str, BackendProfile] = {
    "gpt-4o": _openai("gpt-4o-2024-08-06"),
    "gpt-4.1": _openai("gpt-4.1-2025-04-14"),
    "o1": _openai("o1-2024-12-17", reasoning=True),
    "o1-mini": _openai("o1-mini-2024-09-12", reasoning=True),
    "o3": _openai("o3-2025-04-16", reasoning=True),
    "o3-mini": _openai("o3-mini-2025-01-31", reasoning=True),
    "deepseek-r1": _together("together_ai/deepseek-ai/DeepSeek-R1", reasoning=True),
    "llama-4-maverick": _together(
        "together_ai/meta-llama/Llama-4-Maverick-17B-128E-Instruct-FP8"
    ),
    "llama-4-scout": _together("together_ai/meta-llama/Llama-4-Scout-17B-16E-Instruct"),
}


class Settings(BaseModel):
    """Validated toolkit settings (config file merged with environment overrides)."""

    cache_dir: Path = DEFAULT_CACHE_DIR
    parallelism: int = Field(default=DEFAULT_PARALLELISM, ge=1)
    max_retries: int = Field(default=DEFAULT_MAX_RETRIES, ge=0)
    profiles: dict[str, BackendProfile] = Field(
        default_factory=lambda: dict(BUILTIN_PROFILES)
    )

    def profile(self, name: str) -> BackendProfile:
        if name not in self.profiles:
            raise ConfigError(f"Unknown backend profile '{name}'")
        return self.profiles[name]


def load_settings(config_path: Optional[str] = None) -> Settings:
    """
    Load settings from an optional YAML file, then apply environment overrides.

    Args:
        config_path: Path to a YAML config file. Falls back to $S3AP_CONFIG when None.

    Returns:
        Settings: the merged, validated settings.

    Raises:
        ConfigError: if the file is missing, not YAML, or fails validation.
    """
    config_path = config_path or os.getenv(ENV_CONFIG)
    raw: dict = {}
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError("Config file does not exist", config_path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Config file is not valid YAML: {e}", config_path)
        if not isinstance(raw, dict):
            raise ConfigError("Config file must hold a mapping", config_path)

    profiles = dict(BUILTIN_PROFILES)
    profiles.update(raw.pop("profiles", None) or {})
    try:
        settings = Settings(profiles=profiles, **raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}", config_path)

    cache_dir = os.getenv(ENV_CACHE_DIR)
    if cache_dir:
        settings.cache_dir = Path(cache_dir)
    logger.debug(f"Settings loaded (config: {config_path}, cache: {settings.cache_dir})")
    return settings
