"""Workbench configuration module."""

from __future__ import annotations

from dataclasses import dataclass, field
import os


def _env_int(name: str, default: int) -> int:
    return int(os.environ.get(name, default))


@dataclass
class Config:
    """Settings shared by the CLI, the verifier and the samplers."""

    LOG_LEVEL: str = field(default_factory=lambda: os.environ.get("FORMALNETS_LOG_LEVEL", "WARNING"))
    DEFAULT_STEPS: int = field(default_factory=lambda: _env_int("FORMALNETS_DEFAULT_STEPS", 64))
    VERIFY_WORKERS: int = field(default_factory=lambda: _env_int("FORMALNETS_VERIFY_WORKERS", 4))
    PERMUTATION_CAP: int = field(default_factory=lambda: _env_int("FORMALNETS_PERMUTATION_CAP", 5040))
    SAMPLE_SEED: int = field(default_factory=lambda: _env_int("FORMALNETS_SEED", 0))
    AUDIT: bool = field(default_factory=lambda: os.environ.get("FORMALNETS_AUDIT", "1") != "0")


def load_config() -> Config:
    """Resolve the configuration based on environment variables."""
    return Config()
