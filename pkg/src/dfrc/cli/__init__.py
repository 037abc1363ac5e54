"""Experiment harness exposed as the ``dfrc`` console script."""

from .config import ConfigError, MissingArtifactError, RunConfig, load_config, parse_config
from .main import main

__all__ = ["ConfigError", "MissingArtifactError", "RunConfig", "load_config", "main", "parse_config"]
